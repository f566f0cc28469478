/**
 * Out-of-order response handling: geometry responses carrying a revision
 * lower than the last applied mutation (or than something already shown)
 * are discarded instead of cancelled. Displayed revisions never decrease.
 */
export class RevisionGate {
  private lastApplied = 0;
  private displayed = -1;

  /** Record the revision returned by a successful mutation. */
  applied(revision: number): void {
    if (revision > this.lastApplied) {
      this.lastApplied = revision;
    }
  }

  /** Decide whether a fetched payload may be shown; records it if so. */
  admit(revision: number): boolean {
    if (revision < this.lastApplied || revision < this.displayed) {
      return false;
    }
    this.displayed = revision;
    return true;
  }

  get lastAppliedRevision(): number {
    return this.lastApplied;
  }

  get displayedRevision(): number {
    return this.displayed;
  }
}
