/**
 * The fixed 7-label tag order shared with the server. Index positions matter:
 * the tag picker and every payload use exactly this order.
 */
export const NER_LABELS = [
  "B-PER",
  "I-PER",
  "B-LOC",
  "I-LOC",
  "B-ORG",
  "I-ORG",
  "O",
] as const;

export type NerLabel = (typeof NER_LABELS)[number];

export function isKnownLabel(tag: string): tag is NerLabel {
  return (NER_LABELS as readonly string[]).includes(tag);
}

function entityType(tag: string): string | null {
  return tag === "O" ? null : tag.slice(2);
}

/**
 * Client-side BIO2 validation, a strict superset of the server's check:
 * every label must be known and an I-X may only follow B-X or I-X. Returns
 * null when the sequence is valid, otherwise a human-readable reason.
 */
export function validateBio2(tags: readonly string[], expectedLength?: number): string | null {
  if (expectedLength !== undefined && tags.length !== expectedLength) {
    return `expected ${expectedLength} tags, got ${tags.length}`;
  }
  if (tags.length === 0) {
    return "empty tag sequence";
  }
  let previous = "O";
  for (let i = 0; i < tags.length; i++) {
    const tag = tags[i]!;
    if (!isKnownLabel(tag)) {
      return `unknown label ${tag} at token ${i + 1}`;
    }
    if (tag.startsWith("I-") && entityType(previous) !== entityType(tag)) {
      return `${tag} cannot follow ${previous} (token ${i + 1})`;
    }
    previous = tag;
  }
  return null;
}
