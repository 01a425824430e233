import { AttributeInfo } from "../types.js";
import { massPercentages } from "../state.js";

export interface HeatmapPanel {
  root: HTMLElement;
  setAttributes(attrs: AttributeInfo[]): void;
}

/** Per-attribute level attribution as horizontal bars (percent of the
 * normalized weight mass per level; level 1 is the highest resolution). */
export function createHeatmapPanel(doc: Document = document): HeatmapPanel {
  const root = doc.createElement("section");
  root.className = "panel heatmap-panel";
  root.innerHTML = `<h2>Level attribution</h2><div name="rows"></div>`;
  const rows = root.querySelector<HTMLElement>("div[name=rows]")!;

  return {
    root,
    setAttributes(attrs) {
      rows.innerHTML = "";
      for (const attr of attrs) {
        const row = doc.createElement("div");
        row.className = "heatmap-row";
        const label = doc.createElement("span");
        label.textContent = `${attr.name} (peak: level ${attr.argmax_level})`;
        row.appendChild(label);
        const percentages = massPercentages(attr.level_mass);
        percentages.forEach((pct, i) => {
          const bar = doc.createElement("div");
          bar.className = "bar";
          bar.style.width = `${pct}%`;
          bar.dataset.level = String(i + 1);
          bar.dataset.percent = pct.toFixed(1);
          bar.title = `level ${i + 1}: ${pct.toFixed(1)}%`;
          row.appendChild(bar);
        });
        rows.appendChild(row);
      }
    },
  };
}
