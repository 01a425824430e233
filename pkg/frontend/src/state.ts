/** Client-side parameter clamping and slider geometry. Every value leaving
 * the UI passes through these helpers, so out-of-range requests cannot be
 * constructed. Ranges come from the server's /api/encode response. */

export const ALPHA_MIN = -1;
export const ALPHA_MAX = 1;
export const ALPHA_STEP = 0.05;

/** Clamp to [-1, 1] and snap onto the 0.05 grid. */
export function clampAlpha(value: number): number {
  if (Number.isNaN(value)) return 0;
  const clamped = Math.min(ALPHA_MAX, Math.max(ALPHA_MIN, value));
  // snap, then round away float residue (0.30000000000000004 etc.)
  return Math.round(Math.round(clamped / ALPHA_STEP) * ALPHA_STEP * 100) / 100;
}

/** Log-spaced stops for the k slider: 0, 1, 2, 4, ..., flatLen.
 * Entanglement varies over orders of magnitude of k, so the interesting
 * region near small k gets most of the slider travel. */
export function kStops(flatLen: number): number[] {
  if (!Number.isInteger(flatLen) || flatLen < 1) {
    throw new Error(`flatLen must be a positive integer, got ${flatLen}`);
  }
  const stops = [0];
  for (let k = 1; k < flatLen; k *= 2) stops.push(k);
  stops.push(flatLen);
  return [...new Set(stops)].sort((a, b) => a - b);
}

/** Snap an arbitrary k onto the nearest stop (ties toward the larger stop). */
export function clampK(value: number, flatLen: number): number {
  const stops = kStops(flatLen);
  if (!Number.isFinite(value)) return flatLen;
  let best = stops[0];
  for (const s of stops) {
    if (Math.abs(s - value) <= Math.abs(best - value)) best = s;
  }
  return best;
}

export function clampSplit(value: number, L: number): number {
  if (!Number.isFinite(value)) return 0;
  return Math.min(L, Math.max(0, Math.round(value)));
}

export function clampUnit(value: number): number {
  if (!Number.isFinite(value)) return 0;
  return Math.min(1, Math.max(0, value));
}

/** Staged interpolation presets. Progress p in [0, 1] saturates one level at
 * a time following `order`; the noise-map weight is the mean lambda. Mirrors
 * the server-side path builders exactly. */
function stagedLambdas(p: number, L: number, order: number[]): { lambdas: number[]; xTWeight: number } {
  const scaled = clampUnit(p) * L;
  const lambdas = new Array<number>(L).fill(0);
  order.forEach((lvl, rank) => {
    lambdas[lvl] = Math.min(1, Math.max(0, scaled - rank));
  });
  const xTWeight = lambdas.reduce((a, b) => a + b, 0) / L;
  return { lambdas, xTWeight };
}

/** Low levels (highest resolution) move first. */
export function lowFirstLambdas(p: number, L: number) {
  return stagedLambdas(p, L, [...Array(L).keys()]);
}

export function highFirstLambdas(p: number, L: number) {
  return stagedLambdas(p, L, [...Array(L).keys()].reverse());
}

/** Per-level mass as whole-ish percentages for the heatmap bars. */
export function massPercentages(levelMass: number[]): number[] {
  const total = levelMass.reduce((a, b) => a + b, 0);
  if (total <= 0) return levelMass.map(() => 0);
  return levelMass.map((m) => (m / total) * 100);
}
