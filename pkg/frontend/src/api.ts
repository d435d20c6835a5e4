import type {
  AnnotationBody,
  CandidateListing,
  ObjectView,
  QcReportResponse,
  QcSampleResponse,
  SceneListing,
  SceneObjects,
  TrainingExport,
} from "./types.js";

/** Raised for transport failures and unexpected statuses; the UI shows
 *  these in a retryable banner rather than crashing the view. */
export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number | null = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type SubmitResult =
  | { ok: true; recordId: string }
  | { ok: false; status: number; errors: Record<string, string> };

export class ReviewApi {
  constructor(readonly baseUrl: string) {}

  private async getJson<T>(path: string): Promise<T> {
    let resp: Response;
    try {
      resp = await fetch(this.baseUrl + path);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    if (!resp.ok) {
      throw new ApiError(await errorText(resp), resp.status);
    }
    return (await resp.json()) as T;
  }

  listScenes(): Promise<SceneListing> {
    return this.getJson("/scenes");
  }

  sceneObjects(sceneId: string): Promise<SceneObjects> {
    return this.getJson(`/scenes/${encodeURIComponent(sceneId)}/objects`);
  }

  objectView(objectId: string, points = 2048): Promise<ObjectView> {
    return this.getJson(`/objects/${encodeURIComponent(objectId)}?n=${points}`);
  }

  candidates(objectId: string, points = 512): Promise<CandidateListing> {
    return this.getJson(`/objects/${encodeURIComponent(objectId)}/candidates?n=${points}`);
  }

  async submitAnnotation(objectId: string, body: AnnotationBody): Promise<SubmitResult> {
    let resp: Response;
    try {
      resp = await fetch(`${this.baseUrl}/objects/${encodeURIComponent(objectId)}/annotation`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    if (resp.status === 422) {
      const payload = (await resp.json()) as { errors?: Record<string, string> };
      return { ok: false, status: 422, errors: payload.errors ?? {} };
    }
    if (!resp.ok) {
      throw new ApiError(await errorText(resp), resp.status);
    }
    const payload = (await resp.json()) as { record_id: string };
    return { ok: true, recordId: payload.record_id };
  }

  qcSample(batchId: string, seed: number): Promise<QcSampleResponse> {
    return this.getJson(`/qc/${encodeURIComponent(batchId)}/sample?seed=${seed}`);
  }

  async qcVerdicts(
    batchId: string,
    seed: number,
    verdicts: Record<string, boolean>,
  ): Promise<QcReportResponse> {
    const resp = await fetch(`${this.baseUrl}/qc/${encodeURIComponent(batchId)}/verdicts`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ v: 1, seed, verdicts }),
    });
    if (!resp.ok) {
      throw new ApiError(await errorText(resp), resp.status);
    }
    return (await resp.json()) as QcReportResponse;
  }

  exportTraining(): Promise<TrainingExport> {
    return this.getJson("/export/training");
  }
}

async function errorText(resp: Response): Promise<string> {
  try {
    const payload = (await resp.json()) as { error?: string };
    if (payload.error) return payload.error;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `request failed with status ${resp.status}`;
}
