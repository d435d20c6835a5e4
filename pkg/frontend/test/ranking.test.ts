// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from "vitest";
import { SessionState } from "../src/state";
import { CandidateGrid, RankingList } from "../src/widgets";
import type { CandidateView, ObjectView } from "../src/types";

const ASSETS = ["a0", "a1", "a2", "a3", "a4", "a5", "a6"];

function fakeView(): ObjectView {
  return {
    v: 1,
    object_id: "obj",
    scene_id: "scene",
    category: "chair",
    caption: "a chair",
    image: null,
    cloud: { count: 1, points: [[0, 0, 0]] },
  };
}

function fakeCandidates(): CandidateView[] {
  return ASSETS.map((id) => ({
    asset_id: id,
    provenance: "retrieval",
    cloud: { count: 1, points: [[0, 0, 0]] },
    thumbnail_png: "",
  }));
}

interface Harness {
  state: SessionState;
  grid: CandidateGrid;
  list: RankingList;
  submitted: number;
}

function setup(): Harness {
  document.body.innerHTML = "";
  const state = new SessionState();
  state.openObject(fakeView(), fakeCandidates());
  const harness = { state, submitted: 0 } as Harness;
  const render = () => {
    harness.grid.render();
    harness.list.render();
  };
  harness.grid = new CandidateGrid(document.body, state, render);
  harness.list = new RankingList(document.body, state, () => (harness.submitted += 1), render);
  render();
  return harness;
}

function click(selector: string): void {
  const el = document.querySelector<HTMLElement>(selector);
  if (!el) throw new Error(`no element for ${selector}`);
  el.click();
}

function rankButton(assetId: string): HTMLButtonElement {
  const btn = document.querySelector<HTMLButtonElement>(
    `.candidate-card[data-asset-id="${assetId}"] .pick-rank`,
  );
  if (!btn) throw new Error(`no rank button for ${assetId}`);
  return btn;
}

function listedIds(): string[] {
  return Array.from(document.querySelectorAll<HTMLElement>(".rank-item")).map(
    (li) => li.dataset.assetId ?? "",
  );
}

function submitButton(): HTMLButtonElement {
  const btn = document.querySelector<HTMLButtonElement>(".submit-annotation");
  if (!btn) throw new Error("no submit button");
  return btn;
}

describe("ranking length gate", () => {
  let h: Harness;
  beforeEach(() => {
    h = setup();
  });

  it("submit stays disabled for an empty draft and a 1-item ranking", () => {
    click('.candidate-card[data-asset-id="a0"] .pick-best');
    expect(submitButton().disabled).toBe(true);

    rankButton("a1").click();
    expect(listedIds()).toEqual(["a1"]);
    expect(submitButton().disabled).toBe(true);
    submitButton().click();
    expect(h.submitted).toBe(0);
  });

  it("opens at 2 alternates and a chosen best", () => {
    click('.candidate-card[data-asset-id="a0"] .pick-best');
    rankButton("a1").click();
    rankButton("a2").click();
    expect(submitButton().disabled).toBe(false);
    submitButton().click();
    expect(h.submitted).toBe(1);
  });

  it("a sixth alternate cannot be added through the grid", () => {
    click('.candidate-card[data-asset-id="a0"] .pick-best');
    for (const id of ["a1", "a2", "a3", "a4", "a5"]) {
      rankButton(id).click();
    }
    expect(listedIds()).toHaveLength(5);

    rankButton("a6").click();
    expect(listedIds()).toHaveLength(5);
    expect(listedIds()).not.toContain("a6");
    expect(rankButton("a6").classList.contains("blocked")).toBe(true);
    expect(submitButton().disabled).toBe(false);
  });

  it("no best selected keeps the gate closed even with enough alternates", () => {
    rankButton("a1").click();
    rankButton("a2").click();
    expect(submitButton().disabled).toBe(true);
    const note = document.querySelector(".gate-note");
    expect(note?.textContent).toContain("best");
  });
});

describe("duplicate and identity rules", () => {
  beforeEach(() => {
    setup();
  });

  it("the same id cannot appear twice", () => {
    click('.candidate-card[data-asset-id="a0"] .pick-best');
    rankButton("a1").click();
    rankButton("a1").click();
    expect(listedIds()).toEqual(["a1"]);
    expect(rankButton("a1").classList.contains("blocked")).toBe(true);
  });

  it("the best asset is refused as an alternate", () => {
    click('.candidate-card[data-asset-id="a3"] .pick-best');
    rankButton("a3").click();
    expect(listedIds()).toEqual([]);
  });

  it("promoting a ranked alternate to best removes it from the list", () => {
    click('.candidate-card[data-asset-id="a0"] .pick-best');
    rankButton("a1").click();
    rankButton("a2").click();
    click('.candidate-card[data-asset-id="a1"] .pick-best');
    expect(listedIds()).toEqual(["a2"]);
    expect(submitButton().disabled).toBe(true);
  });
});

describe("reordering", () => {
  beforeEach(() => {
    setup();
  });

  it("move buttons reorder without creating duplicates", () => {
    click('.candidate-card[data-asset-id="a0"] .pick-best');
    for (const id of ["a1", "a2", "a3"]) {
      rankButton(id).click();
    }
    const downFirst = document.querySelector<HTMLButtonElement>(".rank-item .move-down");
    downFirst?.click();
    expect(listedIds()).toEqual(["a2", "a1", "a3"]);

    const items = document.querySelectorAll<HTMLButtonElement>(".rank-item .move-up");
    items[2].click();
    expect(listedIds()).toEqual(["a2", "a3", "a1"]);
    expect(new Set(listedIds()).size).toBe(3);
  });

  it("drag drop reorders through the same guarded path", () => {
    click('.candidate-card[data-asset-id="a0"] .pick-best');
    for (const id of ["a1", "a2", "a3"]) {
      rankButton(id).click();
    }
    const items = document.querySelectorAll<HTMLElement>(".rank-item");
    items[0].dispatchEvent(new Event("dragstart", { bubbles: true }));
    items[2].dispatchEvent(new Event("drop", { bubbles: true }));
    expect(listedIds()).toEqual(["a2", "a3", "a1"]);
    expect(new Set(listedIds()).size).toBe(3);
  });

  it("removal knows the id, not just the position", () => {
    click('.candidate-card[data-asset-id="a0"] .pick-best');
    for (const id of ["a1", "a2", "a3"]) {
      rankButton(id).click();
    }
    const removeSecond = document.querySelectorAll<HTMLButtonElement>(".rank-item .remove-rank")[1];
    removeSecond.click();
    expect(listedIds()).toEqual(["a1", "a3"]);
  });
});

describe("field errors from the service", () => {
  it("render next to the ranking controls", () => {
    const h = setup();
    h.list.showFieldErrors({ ranking: "ranking repeats candidate ids" });
    const note = document.querySelector(".gate-note");
    expect(note?.textContent).toBe("ranking: ranking repeats candidate ids");
  });
});
