import { describe, expect, it } from "vitest";

import { RevisionGate } from "../src/revision";

describe("RevisionGate", () => {
  it("admits fresh revisions and records them", () => {
    const gate = new RevisionGate();
    expect(gate.admit(0)).toBe(true);
    expect(gate.displayedRevision).toBe(0);
    gate.applied(2);
    expect(gate.admit(2)).toBe(true);
    expect(gate.displayedRevision).toBe(2);
  });

  it("discards responses older than the last applied mutation", () => {
    const gate = new RevisionGate();
    gate.applied(1);
    gate.applied(2);
    expect(gate.admit(1)).toBe(false);
    expect(gate.displayedRevision).toBe(-1);
    expect(gate.admit(2)).toBe(true);
  });

  it("never lets the displayed revision decrease", () => {
    const gate = new RevisionGate();
    expect(gate.admit(5)).toBe(true);
    expect(gate.admit(4)).toBe(false);
    expect(gate.displayedRevision).toBe(5);
  });

  it("applied revisions never regress", () => {
    const gate = new RevisionGate();
    gate.applied(3);
    gate.applied(1);
    expect(gate.lastAppliedRevision).toBe(3);
  });
});
