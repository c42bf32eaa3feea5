/** Pure view-model helpers kept separate from DOM code for testability. */

import { validateBio2 } from "./tags";

export function disagreementIndices(
  stored: readonly string[],
  predicted: readonly string[],
): number[] {
  const out: number[] = [];
  for (let i = 0; i < Math.max(stored.length, predicted.length); i++) {
    if (stored[i] !== predicted[i]) {
      out.push(i);
    }
  }
  return out;
}

export interface SubmitGate {
  ok: boolean;
  reason: string | null;
}

/** Submit stays disabled until the edited sequence passes BIO2 validation. */
export function submitGate(tags: readonly string[], expectedLength: number): SubmitGate {
  const reason = validateBio2(tags, expectedLength);
  return { ok: reason === null, reason };
}

export function statusLabel(status: string): string {
  switch (status) {
    case "pending":
      return "pending";
    case "one_decision":
      return "awaiting 2nd auditor";
    case "conflicted":
      return "conflicted — needs tie-breaker";
    case "resolved":
      return "resolved";
    default:
      return status;
  }
}

export function formatRate(rate: number): string {
  return `${(rate * 100).toFixed(1)}%`;
}
