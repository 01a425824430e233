/** Sequence-numbered request tracking: one tracker per panel, at most one
 * displayed response, stale responses discarded. */
export class RequestSequencer {
  private issued = 0;
  private displayed = 0;

  /** Call when a request is issued; returns its sequence number. */
  issue(): number {
    return ++this.issued;
  }

  /** Call when a response arrives. True iff this response is newer than
   * anything displayed so far AND belongs to the latest issued request;
   * superseded responses must be dropped by the caller. */
  accept(seq: number): boolean {
    if (seq !== this.issued || seq <= this.displayed) return false;
    this.displayed = seq;
    return true;
  }

  get inFlight(): boolean {
    return this.issued > this.displayed;
  }
}
