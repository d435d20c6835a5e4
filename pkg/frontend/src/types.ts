// Payload shapes for the annotation service JSON API. Every response
// carries a schema version field "v".

export interface CloudPayload {
  count: number;
  points: number[][];
  colors?: number[][];
}

export interface SceneSummary {
  scene_id: string;
  object_count: number;
  annotated_count: number;
}

export interface SceneListing {
  v: number;
  scenes: SceneSummary[];
}

export interface SceneObjectSummary {
  object_id: string;
  category: string;
  candidate_count: number;
  annotated: boolean;
}

export interface SceneObjects {
  v: number;
  scene_id: string;
  objects: SceneObjectSummary[];
}

export interface ObjectView {
  v: number;
  object_id: string;
  scene_id: string;
  category: string;
  caption: string;
  image: string | null;
  cloud: CloudPayload;
}

export interface CandidateView {
  asset_id: string;
  provenance: string;
  cloud: CloudPayload;
  thumbnail_png: string;
}

export interface CandidateListing {
  v: number;
  object_id: string;
  candidates: CandidateView[];
}

export interface TransformBody {
  translation: [number, number, number];
  scale: number;
  yaw_degrees: number;
}

export interface AnnotationBody {
  v: number;
  best_asset_id: string;
  transform: TransformBody;
  ranking: string[];
  annotator_id: string;
  timestamp: string;
}

export interface QcSampleResponse {
  v: number;
  batch_id: string;
  seed: number;
  batch_size: number;
  sample_size: number;
  sampled: string[];
}

export interface QcReportResponse {
  v: number;
  batch_id: string;
  seed: number;
  sampled: string[];
  pass_count: number;
  pass_rate: number;
  accepted: boolean;
}

export interface TrainingQuadruple {
  scene_id: string;
  object_id: string;
  candidates: string[];
  truth_index: number;
  ranking: string[];
  caption: string;
  image: string | null;
  annotator_id: string;
  timestamp: string;
}

export interface TrainingExport {
  v: number;
  quadruples: TrainingQuadruple[];
  unannotated: string[];
}
