import { describe, expect, it } from "vitest";

import { disagreementIndices, formatRate, statusLabel, submitGate } from "../src/viewmodel";

describe("disagreementIndices", () => {
  it("finds differing positions", () => {
    expect(disagreementIndices(["B-PER", "O", "O"], ["B-LOC", "O", "B-ORG"])).toEqual([0, 2]);
  });

  it("is empty when sequences agree", () => {
    expect(disagreementIndices(["O"], ["O"])).toEqual([]);
  });

  it("treats length mismatch positions as disagreements", () => {
    expect(disagreementIndices(["O"], ["O", "B-PER"])).toEqual([1]);
  });
});

describe("submitGate", () => {
  it("opens for a valid edit of the right length", () => {
    expect(submitGate(["B-PER", "I-PER"], 2)).toEqual({ ok: true, reason: null });
  });

  it("blocks the classic orphan-inside edit", () => {
    const gate = submitGate(["O", "I-PER"], 2);
    expect(gate.ok).toBe(false);
    expect(gate.reason).toMatch(/I-PER cannot follow O/);
  });

  it("blocks wrong lengths", () => {
    expect(submitGate(["O"], 3).ok).toBe(false);
  });
});

describe("labels and formatting", () => {
  it("maps statuses to auditor-facing text", () => {
    expect(statusLabel("pending")).toBe("pending");
    expect(statusLabel("one_decision")).toMatch(/2nd auditor/);
    expect(statusLabel("conflicted")).toMatch(/tie-breaker/);
    expect(statusLabel("resolved")).toBe("resolved");
  });

  it("formats rates as percentages", () => {
    expect(formatRate(0.25)).toBe("25.0%");
    expect(formatRate(0)).toBe("0.0%");
  });
});
