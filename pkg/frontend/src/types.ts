// Payload shapes of the ragtrace HTTP API (see src/ragtrace/schemas/ in the
// backend repo). The UI never recomputes metrics; it renders these verbatim.

export const METRIC_AXES = [
  "retrieval_failure",
  "prompt_fragility",
  "generation_anomaly",
  "standard_anomaly",
  "correctness",
  "topic_relevance",
] as const;

export type MetricAxis = (typeof METRIC_AXES)[number];

export const FAILURE_TYPES = [
  "retrieval_failure",
  "prompt_vulnerability",
  "generation_anomaly",
  "standard_inconsistency",
] as const;

export type FailureType = (typeof FAILURE_TYPES)[number];

export const FAILURE_COLORS: Record<FailureType, string> = {
  retrieval_failure: "#d64541",
  prompt_vulnerability: "#f4b400",
  generation_anomaly: "#3b6fd4",
  standard_inconsistency: "#8e44ad",
};

export type MetricVector = Record<MetricAxis, number>;

export interface Position {
  x: number;
  y: number;
}

export interface ProjectionExport {
  points: { id: string; x: number; y: number }[];
  grid: {
    resolution: number;
    cells: number[];
    bounds: { x_min: number; x_max: number; y_min: number; y_max: number };
  };
  kl_history: number[];
}

export interface CellTopics {
  cell: { i: number; j: number };
  keywords: { term: string; score: number }[];
}

export interface SearchResult {
  question_id: string;
  text: string;
  score: number;
  similarity: number;
  metrics: MetricVector | null;
  position: Position | null;
}

export interface SearchResponse {
  query: { text: string; position: Position | null };
  results: SearchResult[];
}

export interface RetrievalRunPayload {
  strategy: { kind: string; k: number; keywords: string[]; tags: string[] };
  query_text_used: string;
  results: { chunk_id: string; similarity: number; relevance_class: string }[];
}

export interface QuestionDetails {
  question_id: string;
  question_text: string;
  ground_truth: string | null;
  tags: string[];
  answer_text: string | null;
  related_chunks: number;
  metrics: MetricVector;
  record: { retrieval_run: RetrievalRunPayload | null; error: string | null };
  annotated_answer: AnnotatedAnswer | null;
}

export interface ChunkRelink {
  runs: RetrievalRunPayload[];
  links: { run_a: number; rank_a: number; run_b: number; rank_b: number }[];
  node_sizes: number[][];
  chunks: Record<string, { text: string; source_doc: string }>;
}

export type SpanClass = "named_entity" | "evidence_supported" | "uncertain";

export interface AnnotatedAnswer {
  text: string;
  spans: { start: number; end: number; class: SpanClass; supporting_chunk_ids: string[] }[];
}

export interface EvidenceResponse {
  annotated_answer: AnnotatedAnswer;
  graph: {
    nodes: string[];
    edges: { entity: string; chunk_id: string; support_score: number }[];
  };
}

export interface FailuresResponse {
  threshold: number;
  anchors: { type: FailureType; order: number }[];
  questions: { question_id: string; weights: Record<FailureType, number>; failure_types: string[] }[];
}

export interface RadarChart {
  question_id: string;
  axes: string[];
  series: Record<string, number[]>;
}

export interface RadarResponse {
  charts: RadarChart[];
}

export interface RunDescriptor {
  run_id: string;
  label: string;
  started_at: string;
  finished_at: string;
  questions: number;
}

export interface SamplingDraft {
  diversity: number;
  num_chunks: number;
  keywords: string[];
  tags: string[];
  num_questions: number;
  selection: "high_hallucination" | "similarity_to_focus" | "improvement_potential" | "random";
  focus_question_id: string | null;
}
