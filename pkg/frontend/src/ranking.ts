// Client-side mirror of the service's annotation invariants. The
// widgets delegate every mutation here, so no interaction sequence can
// produce a draft the server would 422.

export const RANKING_MIN = 2;
export const RANKING_MAX = 5;

export interface RankingDraft {
  best: string | null;
  /** Ranked alternates, best first, never containing `best`. */
  ordered: string[];
}

export function emptyRanking(): RankingDraft {
  return { best: null, ordered: [] };
}

export type RankingProblem =
  | "no-best"
  | "duplicate"
  | "is-best"
  | "unknown-id"
  | "full"
  | "too-short";

export function selectBest(draft: RankingDraft, assetId: string): RankingDraft {
  // Promoting a ranked alternate to best pulls it out of the list.
  return { best: assetId, ordered: draft.ordered.filter((id) => id !== assetId) };
}

export function addAlternate(
  draft: RankingDraft,
  assetId: string,
  known: readonly string[],
): RankingProblem | null {
  if (!known.includes(assetId)) return "unknown-id";
  if (assetId === draft.best) return "is-best";
  if (draft.ordered.includes(assetId)) return "duplicate";
  if (draft.ordered.length >= RANKING_MAX) return "full";
  draft.ordered.push(assetId);
  return null;
}

export function removeAlternate(draft: RankingDraft, assetId: string): void {
  const at = draft.ordered.indexOf(assetId);
  if (at >= 0) draft.ordered.splice(at, 1);
}

export function moveAlternate(draft: RankingDraft, from: number, to: number): void {
  if (from === to || from < 0 || from >= draft.ordered.length) return;
  const bounded = Math.min(Math.max(to, 0), draft.ordered.length - 1);
  const [id] = draft.ordered.splice(from, 1);
  draft.ordered.splice(bounded, 0, id);
}

/** Empty list = submittable draft; anything else names the first gap. */
export function submitProblems(draft: RankingDraft): RankingProblem[] {
  const problems: RankingProblem[] = [];
  if (draft.best === null) problems.push("no-best");
  if (draft.ordered.length < RANKING_MIN) problems.push("too-short");
  if (draft.ordered.length > RANKING_MAX) problems.push("full");
  if (new Set(draft.ordered).size !== draft.ordered.length) problems.push("duplicate");
  if (draft.best !== null && draft.ordered.includes(draft.best)) problems.push("is-best");
  return problems;
}

export function canSubmit(draft: RankingDraft): boolean {
  return submitProblems(draft).length === 0;
}
