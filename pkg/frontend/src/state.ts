import type { AnnotationBody, CandidateView, ObjectView } from "./types.js";
import { PoseDraft, identityPose } from "./pose.js";
import {
  RankingDraft,
  RankingProblem,
  addAlternate,
  canSubmit,
  emptyRanking,
  moveAlternate,
  removeAlternate,
  selectBest,
  submitProblems,
} from "./ranking.js";

/** One browser tab's working memory. The server stays the source of
 *  truth; everything here is a draft until submit succeeds. */
export class SessionState {
  currentSceneId: string | null = null;
  currentObjectId: string | null = null;
  candidateOrder: string[] = [];
  candidates: CandidateView[] = [];
  objectView: ObjectView | null = null;
  pose: PoseDraft = identityPose();
  ranking: RankingDraft = emptyRanking();
  dirty = false;
  annotated = new Set<string>();
  showAnnotated = true;

  openScene(sceneId: string): void {
    this.currentSceneId = sceneId;
    this.currentObjectId = null;
    this.objectView = null;
    this.candidates = [];
    this.candidateOrder = [];
    this.resetDrafts();
  }

  openObject(view: ObjectView, candidates: CandidateView[]): void {
    this.currentSceneId = view.scene_id;
    this.currentObjectId = view.object_id;
    this.objectView = view;
    this.candidates = candidates;
    this.candidateOrder = candidates.map((c) => c.asset_id);
    this.resetDrafts();
  }

  resetDrafts(): void {
    this.pose = identityPose();
    this.ranking = emptyRanking();
    this.dirty = false;
  }

  resetPose(): void {
    this.pose = identityPose();
    this.dirty = true;
  }

  applyPose(pose: PoseDraft): void {
    this.pose = pose;
    this.dirty = true;
  }

  chooseBest(assetId: string): boolean {
    if (!this.candidateOrder.includes(assetId)) return false;
    this.ranking = selectBest(this.ranking, assetId);
    this.pose = identityPose();
    this.dirty = true;
    return true;
  }

  addAlternate(assetId: string): ReturnType<typeof addAlternate> {
    const problem = addAlternate(this.ranking, assetId, this.candidateOrder);
    if (problem === null) this.dirty = true;
    return problem;
  }

  removeAlternate(assetId: string): void {
    removeAlternate(this.ranking, assetId);
    this.dirty = true;
  }

  moveAlternate(from: number, to: number): void {
    moveAlternate(this.ranking, from, to);
    this.dirty = true;
  }

  submittable(): boolean {
    return this.currentObjectId !== null && canSubmit(this.ranking);
  }

  gateProblems(): RankingProblem[] {
    return submitProblems(this.ranking);
  }

  /** Only a submittable draft can become a POST body; callers must not
   *  bypass this (it is what keeps client and server invariants equal). */
  buildAnnotationBody(annotatorId: string, timestamp: string): AnnotationBody {
    if (!this.submittable() || this.ranking.best === null) {
      throw new Error(`draft not submittable: ${this.gateProblems().join(", ")}`);
    }
    return {
      v: 1,
      best_asset_id: this.ranking.best,
      transform: {
        translation: [this.pose.x, this.pose.y, this.pose.z],
        scale: this.pose.scale,
        yaw_degrees: this.pose.yawDegrees,
      },
      ranking: [...this.ranking.ordered],
      annotator_id: annotatorId,
      timestamp,
    };
  }

  markAnnotated(objectId: string): void {
    this.annotated.add(objectId);
    if (objectId === this.currentObjectId) this.dirty = false;
  }

  visibleObjects(objectIds: readonly string[]): string[] {
    if (this.showAnnotated) return [...objectIds];
    return objectIds.filter((id) => !this.annotated.has(id));
  }
}
