import { ApiError, ReviewApi } from "./api.js";
import { SessionState } from "./state.js";
import { CandidateGrid, ErrorBanner, PoseControls, RankingList } from "./widgets.js";
import { bindKeyboard } from "./keyboard.js";
import { drawCloud } from "./splat.js";
import type { CloudPayload, SceneObjectSummary } from "./types.js";

const VIEW_W = 480;
const VIEW_H = 360;

export class App {
  readonly state = new SessionState();
  private readonly api: ReviewApi;
  private banner!: ErrorBanner;
  private grid!: CandidateGrid;
  private ranking!: RankingList;
  private sceneList!: HTMLElement;
  private objectList!: HTMLElement;
  private caption!: HTMLElement;
  private canvas!: HTMLCanvasElement;
  private status!: HTMLElement;
  private filterBox!: HTMLInputElement;
  private viewMode: "object" | "scene" = "object";
  private sceneObjects: SceneObjectSummary[] = [];
  private sceneClouds = new Map<string, CloudPayload>();
  private annotatorId: string;

  constructor(baseUrl: string, annotatorId = "anonymous") {
    this.api = new ReviewApi(baseUrl);
    this.annotatorId = annotatorId;
  }

  mount(root: HTMLElement): void {
    root.textContent = "";
    this.banner = new ErrorBanner(root);

    const columns = document.createElement("div");
    columns.className = "columns";
    root.appendChild(columns);

    const nav = document.createElement("div");
    nav.className = "nav-column";
    columns.appendChild(nav);

    this.sceneList = document.createElement("ul");
    this.sceneList.className = "scene-list";
    nav.appendChild(this.sceneList);

    const filterLabel = document.createElement("label");
    this.filterBox = document.createElement("input");
    this.filterBox.type = "checkbox";
    this.filterBox.addEventListener("change", () => {
      this.state.showAnnotated = !this.filterBox.checked;
      this.renderObjectList();
    });
    filterLabel.append(this.filterBox, document.createTextNode(" hide annotated"));
    nav.appendChild(filterLabel);

    this.objectList = document.createElement("ul");
    this.objectList.className = "object-list";
    nav.appendChild(this.objectList);

    const main = document.createElement("div");
    main.className = "main-column";
    columns.appendChild(main);

    this.caption = document.createElement("p");
    this.caption.className = "caption";
    main.appendChild(this.caption);

    const viewBar = document.createElement("div");
    const toggle = document.createElement("button");
    toggle.className = "view-toggle";
    toggle.textContent = "scene view";
    toggle.addEventListener("click", () => {
      this.viewMode = this.viewMode === "object" ? "scene" : "object";
      toggle.textContent = this.viewMode === "object" ? "scene view" : "object view";
      void this.redraw();
    });
    viewBar.appendChild(toggle);
    main.appendChild(viewBar);

    this.canvas = document.createElement("canvas");
    this.canvas.width = VIEW_W;
    this.canvas.height = VIEW_H;
    main.appendChild(this.canvas);

    new PoseControls(main, this.state, () => void this.redraw());
    this.grid = new CandidateGrid(main, this.state, () => this.renderWidgets());
    this.ranking = new RankingList(
      main,
      this.state,
      () => void this.submit(),
      () => this.renderWidgets(),
    );

    this.status = document.createElement("p");
    this.status.className = "status-line";
    main.appendChild(this.status);

    bindKeyboard(document, this.state, {
      nextObject: () => void this.step(1),
      prevObject: () => void this.step(-1),
      submit: () => void this.submit(),
      render: () => {
        this.renderWidgets();
        void this.redraw();
      },
    });

    void this.loadScenes();
  }

  private async guard<T>(work: () => Promise<T>, retry: () => void): Promise<T | null> {
    try {
      return await work();
    } catch (err) {
      const message = err instanceof ApiError ? err.message : String(err);
      this.banner.show(message, retry);
      return null;
    }
  }

  async loadScenes(): Promise<void> {
    const listing = await this.guard(
      () => this.api.listScenes(),
      () => void this.loadScenes(),
    );
    if (!listing) return;
    this.sceneList.textContent = "";
    for (const scene of listing.scenes) {
      const li = document.createElement("li");
      const btn = document.createElement("button");
      btn.textContent = `${scene.scene_id} (${scene.annotated_count}/${scene.object_count})`;
      btn.addEventListener("click", () => void this.openScene(scene.scene_id));
      li.appendChild(btn);
      this.sceneList.appendChild(li);
    }
    if (listing.scenes.length > 0 && this.state.currentSceneId === null) {
      await this.openScene(listing.scenes[0].scene_id);
    }
  }

  async openScene(sceneId: string): Promise<void> {
    const listing = await this.guard(
      () => this.api.sceneObjects(sceneId),
      () => void this.openScene(sceneId),
    );
    if (!listing) return;
    this.state.openScene(sceneId);
    this.sceneObjects = listing.objects;
    this.sceneClouds.clear();
    for (const obj of listing.objects) {
      if (obj.annotated) this.state.annotated.add(obj.object_id);
    }
    this.renderObjectList();
    this.renderWidgets();
  }

  renderObjectList(): void {
    this.objectList.textContent = "";
    const visible = new Set(this.state.visibleObjects(this.sceneObjects.map((o) => o.object_id)));
    for (const obj of this.sceneObjects) {
      if (!visible.has(obj.object_id)) continue;
      const li = document.createElement("li");
      li.dataset.objectId = obj.object_id;
      if (this.state.annotated.has(obj.object_id)) li.classList.add("annotated");
      const btn = document.createElement("button");
      btn.textContent = `${obj.object_id} [${obj.category}]`;
      btn.addEventListener("click", () => void this.openObject(obj.object_id));
      li.appendChild(btn);
      this.objectList.appendChild(li);
    }
  }

  async openObject(objectId: string): Promise<void> {
    const loaded = await this.guard(
      async () => {
        const view = await this.api.objectView(objectId);
        const candidates = await this.api.candidates(objectId);
        return { view, candidates };
      },
      () => void this.openObject(objectId),
    );
    if (!loaded) return;
    this.state.openObject(loaded.view, loaded.candidates.candidates);
    this.caption.textContent = `${loaded.view.caption} (${loaded.view.category})`;
    this.renderWidgets();
    await this.redraw();
  }

  private async step(direction: 1 | -1): Promise<void> {
    const ids = this.state.visibleObjects(this.sceneObjects.map((o) => o.object_id));
    if (ids.length === 0) return;
    const at = this.state.currentObjectId ? ids.indexOf(this.state.currentObjectId) : -1;
    const next = ids[(at + direction + ids.length) % ids.length];
    await this.openObject(next);
  }

  renderWidgets(): void {
    this.grid.render();
    this.ranking.render();
    void this.redraw();
  }

  async redraw(): Promise<void> {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, VIEW_W, VIEW_H);
    const viewport = { width: VIEW_W, height: VIEW_H };
    if (this.viewMode === "scene") {
      await this.ensureSceneClouds();
      for (const [oid, cloud] of this.sceneClouds) {
        const current = oid === this.state.currentObjectId;
        drawCloud(ctx, cloud, viewport, { alpha: current ? 1 : 0.35 });
      }
      return;
    }
    const view = this.state.objectView;
    if (!view) return;
    drawCloud(ctx, view.cloud, viewport);
    const best = this.state.candidates.find((c) => c.asset_id === this.state.ranking.best);
    if (best) {
      drawCloud(ctx, best.cloud, viewport, { pose: this.state.pose, alpha: 0.6, tint: "#4a9eff" });
    }
  }

  private async ensureSceneClouds(): Promise<void> {
    for (const obj of this.sceneObjects) {
      if (this.sceneClouds.has(obj.object_id)) continue;
      const view = await this.guard(
        () => this.api.objectView(obj.object_id, 256),
        () => void this.redraw(),
      );
      if (view) this.sceneClouds.set(obj.object_id, view.cloud);
    }
  }

  async submit(): Promise<void> {
    const objectId = this.state.currentObjectId;
    if (objectId === null || !this.state.submittable()) return;
    const body = this.state.buildAnnotationBody(this.annotatorId, new Date().toISOString());
    const result = await this.guard(
      () => this.api.submitAnnotation(objectId, body),
      () => void this.submit(),
    );
    if (!result) return;
    if (!result.ok) {
      this.ranking.showFieldErrors(result.errors);
      return;
    }
    this.state.markAnnotated(objectId);
    const entry = this.sceneObjects.find((o) => o.object_id === objectId);
    if (entry) entry.annotated = true;
    this.status.textContent = `saved ${result.recordId}`;
    this.renderObjectList();
    this.renderWidgets();
  }
}

export function boot(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const base = new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8400";
  new App(base).mount(root);
}
