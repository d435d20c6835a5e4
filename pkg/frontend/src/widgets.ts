import type { CandidateView } from "./types.js";
import { SessionState } from "./state.js";
import { RANKING_MAX, RANKING_MIN, RankingProblem } from "./ranking.js";
import {
  PoseUpdate,
  ROTATE_STEP_DEGREES,
  nudge,
  rotateSteps,
  scaleBy,
  setScale,
  setYaw,
} from "./pose.js";

const PROBLEM_TEXT: Record<RankingProblem, string> = {
  "no-best": "pick a best asset first",
  duplicate: "already in the ranking",
  "is-best": "the best asset is ranked implicitly",
  "unknown-id": "not a candidate of this object",
  full: `ranking holds at most ${RANKING_MAX} alternates`,
  "too-short": `rank at least ${RANKING_MIN} alternates`,
};

export function problemText(problem: RankingProblem): string {
  return PROBLEM_TEXT[problem];
}

/** Retryable error banner; shown on any service failure, the view
 *  underneath stays navigable. */
export class ErrorBanner {
  private readonly el: HTMLElement;
  private readonly text: HTMLElement;
  private readonly retry: HTMLButtonElement;
  private onRetry: (() => void) | null = null;

  constructor(parent: HTMLElement) {
    this.el = document.createElement("div");
    this.el.className = "error-banner";
    this.el.hidden = true;
    this.text = document.createElement("span");
    this.retry = document.createElement("button");
    this.retry.textContent = "retry";
    this.retry.addEventListener("click", () => {
      const fn = this.onRetry;
      this.hide();
      if (fn) fn();
    });
    this.el.append(this.text, this.retry);
    parent.appendChild(this.el);
  }

  show(message: string, onRetry: () => void): void {
    this.text.textContent = message;
    this.onRetry = onRetry;
    this.el.hidden = false;
  }

  hide(): void {
    this.el.hidden = true;
    this.onRetry = null;
  }

  get visible(): boolean {
    return !this.el.hidden;
  }
}

/** Candidate thumbnails with provenance badges and best/rank actions. */
export class CandidateGrid {
  readonly el: HTMLElement;
  // Survives re-renders so the refusal cue stays on the button.
  private blockedId: string | null = null;
  private blockedWhy: RankingProblem | null = null;

  constructor(
    parent: HTMLElement,
    private readonly state: SessionState,
    private readonly onChange: () => void,
  ) {
    this.el = document.createElement("div");
    this.el.className = "candidate-grid";
    parent.appendChild(this.el);
  }

  render(): void {
    this.el.textContent = "";
    this.state.candidates.forEach((cand, index) => {
      this.el.appendChild(this.card(cand, index));
    });
  }

  private card(cand: CandidateView, index: number): HTMLElement {
    const card = document.createElement("div");
    card.className = "candidate-card";
    card.dataset.assetId = cand.asset_id;
    if (this.state.ranking.best === cand.asset_id) card.classList.add("best");

    const img = document.createElement("img");
    img.alt = cand.asset_id;
    img.src = `data:image/png;base64,${cand.thumbnail_png}`;
    card.appendChild(img);

    const badge = document.createElement("span");
    badge.className = `badge provenance-${cand.provenance}`;
    badge.textContent = cand.provenance;
    card.appendChild(badge);

    const label = document.createElement("span");
    label.className = "asset-label";
    label.textContent = `${index + 1}. ${cand.asset_id}`;
    card.appendChild(label);

    const bestBtn = document.createElement("button");
    bestBtn.className = "pick-best";
    bestBtn.textContent = "best";
    bestBtn.addEventListener("click", () => {
      this.state.chooseBest(cand.asset_id);
      this.onChange();
    });
    card.appendChild(bestBtn);

    const rankBtn = document.createElement("button");
    rankBtn.className = "pick-rank";
    rankBtn.textContent = "rank";
    if (this.blockedId === cand.asset_id && this.blockedWhy !== null) {
      rankBtn.classList.add("blocked");
      rankBtn.title = problemText(this.blockedWhy);
    }
    rankBtn.addEventListener("click", () => {
      const problem = this.state.addAlternate(cand.asset_id);
      this.blockedId = problem === null ? null : cand.asset_id;
      this.blockedWhy = problem;
      this.onChange();
    });
    card.appendChild(rankBtn);

    return card;
  }
}

/** Ordered alternate list. Reordering goes through move buttons and
 *  HTML5 drag; every mutation funnels through the draft gate, so the
 *  list can never hold duplicates or exceed the length cap. */
export class RankingList {
  readonly el: HTMLElement;
  readonly listEl: HTMLOListElement;
  readonly submitBtn: HTMLButtonElement;
  readonly gateNote: HTMLElement;
  private dragFrom = -1;

  constructor(
    parent: HTMLElement,
    private readonly state: SessionState,
    private readonly onSubmit: () => void,
    private readonly onChange: () => void,
  ) {
    this.el = document.createElement("div");
    this.el.className = "ranking-panel";

    this.listEl = document.createElement("ol");
    this.listEl.className = "ranking-list";
    this.el.appendChild(this.listEl);

    this.gateNote = document.createElement("p");
    this.gateNote.className = "gate-note";
    this.el.appendChild(this.gateNote);

    this.submitBtn = document.createElement("button");
    this.submitBtn.className = "submit-annotation";
    this.submitBtn.textContent = "submit annotation";
    this.submitBtn.addEventListener("click", () => {
      if (!this.state.submittable()) return;
      this.onSubmit();
    });
    this.el.appendChild(this.submitBtn);

    parent.appendChild(this.el);
  }

  render(): void {
    this.listEl.textContent = "";
    this.state.ranking.ordered.forEach((assetId, index) => {
      this.listEl.appendChild(this.item(assetId, index));
    });
    const problems = this.state.gateProblems();
    this.submitBtn.disabled = !this.state.submittable();
    this.gateNote.textContent = problems.map(problemText).join("; ");
  }

  private item(assetId: string, index: number): HTMLLIElement {
    const li = document.createElement("li");
    li.className = "rank-item";
    li.draggable = true;
    li.dataset.assetId = assetId;

    li.addEventListener("dragstart", () => {
      this.dragFrom = index;
      li.classList.add("dragging");
    });
    li.addEventListener("dragover", (e) => e.preventDefault());
    li.addEventListener("drop", (e) => {
      e.preventDefault();
      if (this.dragFrom >= 0 && this.dragFrom !== index) {
        this.state.moveAlternate(this.dragFrom, index);
        this.onChange();
      }
      this.dragFrom = -1;
    });
    li.addEventListener("dragend", () => {
      li.classList.remove("dragging");
      this.dragFrom = -1;
    });

    const label = document.createElement("span");
    label.textContent = `${index + 1}. ${assetId}`;
    li.appendChild(label);

    const up = document.createElement("button");
    up.className = "move-up";
    up.textContent = "up";
    up.disabled = index === 0;
    up.addEventListener("click", () => {
      this.state.moveAlternate(index, index - 1);
      this.onChange();
    });
    li.appendChild(up);

    const down = document.createElement("button");
    down.className = "move-down";
    down.textContent = "down";
    down.disabled = index === this.state.ranking.ordered.length - 1;
    down.addEventListener("click", () => {
      this.state.moveAlternate(index, index + 1);
      this.onChange();
    });
    li.appendChild(down);

    const remove = document.createElement("button");
    remove.className = "remove-rank";
    remove.textContent = "remove";
    remove.addEventListener("click", () => {
      this.state.removeAlternate(assetId);
      this.onChange();
    });
    li.appendChild(remove);

    return li;
  }

  /** 422 reasons from the service, rendered next to the list. */
  showFieldErrors(errors: Record<string, string>): void {
    this.gateNote.textContent = Object.entries(errors)
      .map(([field, msg]) => `${field}: ${msg}`)
      .join("; ");
  }
}

/** Position / height / scale / rotation controls with clamp cues. */
export class PoseControls {
  readonly el: HTMLElement;
  readonly yawInput: HTMLInputElement;
  readonly scaleInput: HTMLInputElement;

  constructor(
    parent: HTMLElement,
    private readonly state: SessionState,
    private readonly onChange: () => void,
  ) {
    this.el = document.createElement("div");
    this.el.className = "pose-controls";

    this.button("x-", () => this.apply(nudge(this.state.pose, "x", -0.05)));
    this.button("x+", () => this.apply(nudge(this.state.pose, "x", 0.05)));
    this.button("y-", () => this.apply(nudge(this.state.pose, "y", -0.05)));
    this.button("y+", () => this.apply(nudge(this.state.pose, "y", 0.05)));
    this.button("lower", () => this.apply(nudge(this.state.pose, "z", -0.05)));
    this.button("raise", () => this.apply(nudge(this.state.pose, "z", 0.05)));
    this.button("shrink", () => this.apply(scaleBy(this.state.pose, 1 / 1.1)));
    this.button("grow", () => this.apply(scaleBy(this.state.pose, 1.1)));
    this.button(`rot -${ROTATE_STEP_DEGREES}`, () => this.rotate(-1));
    this.button(`rot +${ROTATE_STEP_DEGREES}`, () => this.rotate(1));
    this.button("rot -30", () => this.rotate(-6));
    this.button("rot +30", () => this.rotate(6));

    this.yawInput = this.numeric("yaw", (value) => this.apply(setYaw(this.state.pose, value)));
    this.scaleInput = this.numeric("scale", (value) => this.apply(setScale(this.state.pose, value)));

    const reset = document.createElement("button");
    reset.className = "pose-reset";
    reset.textContent = "reset pose";
    reset.addEventListener("click", () => {
      this.state.resetPose();
      this.onChange();
    });
    this.el.appendChild(reset);

    parent.appendChild(this.el);
  }

  private button(label: string, action: () => void): void {
    const btn = document.createElement("button");
    btn.className = `pose-${label.replace(/[^a-z0-9]+/gi, "-")}`;
    btn.textContent = label;
    btn.addEventListener("click", action);
    this.el.appendChild(btn);
  }

  private numeric(name: string, commit: (value: number) => void): HTMLInputElement {
    const input = document.createElement("input");
    input.type = "number";
    input.name = name;
    input.addEventListener("change", () => commit(Number(input.value)));
    this.el.appendChild(input);
    return input;
  }

  private rotate(steps: number): void {
    this.state.applyPose(rotateSteps(this.state.pose, steps));
    this.onChange();
  }

  private apply(update: PoseUpdate): void {
    this.el.classList.toggle("clamped", update.clamped);
    if (!update.clamped || update.pose !== this.state.pose) {
      this.state.applyPose(update.pose);
    }
    this.onChange();
  }
}
