import type {
  CellTopics,
  ChunkRelink,
  EvidenceResponse,
  FailuresResponse,
  ProjectionExport,
  QuestionDetails,
  RadarResponse,
  RunDescriptor,
  SamplingDraft,
  SearchResponse,
} from "./types.js";

/** Thin typed client over the ragtrace HTTP API. Every view talks through
 * this interface, so tests can substitute recorded fixtures. */
export interface Api {
  projection(): Promise<ProjectionExport>;
  cellTopics(i: number, j: number): Promise<CellTopics>;
  search(query: string, preset: string, limit: number): Promise<SearchResponse>;
  questionDetails(id: string): Promise<QuestionDetails>;
  chunkRelink(id: string, strategies: string[]): Promise<ChunkRelink>;
  evidence(id: string): Promise<EvidenceResponse>;
  failures(threshold: number): Promise<FailuresResponse>;
  runs(): Promise<{ runs: RunDescriptor[] }>;
  radar(runId: string, against: string[]): Promise<RadarResponse>;
  launchExperiment(config: SamplingDraft, strategy: object, label: string): Promise<{ run_id: string; job_id: string }>;
  jobStatus(jobId: string): Promise<{ job_id: string; status: string; error: string | null }>;
}

export class HttpApi implements Api {
  constructor(private readonly base: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(`${this.base}${path}`);
    if (!response.ok) throw new Error(`${path}: ${response.status} ${await response.text()}`);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(`${this.base}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw new Error(`${path}: ${response.status} ${await response.text()}`);
    return (await response.json()) as T;
  }

  projection() {
    return this.get<ProjectionExport>("/api/projection");
  }

  cellTopics(i: number, j: number) {
    return this.get<CellTopics>(`/api/cells/${i}/${j}/topics`);
  }

  search(query: string, preset: string, limit: number) {
    return this.post<SearchResponse>("/api/search", { query, preset, limit });
  }

  questionDetails(id: string) {
    return this.get<QuestionDetails>(`/api/questions/${encodeURIComponent(id)}/details`);
  }

  chunkRelink(id: string, strategies: string[]) {
    return this.get<ChunkRelink>(
      `/api/questions/${encodeURIComponent(id)}/chunklink?strategies=${strategies.join(",")}`,
    );
  }

  evidence(id: string) {
    return this.get<EvidenceResponse>(`/api/questions/${encodeURIComponent(id)}/evidence`);
  }

  failures(threshold: number) {
    return this.get<FailuresResponse>(`/api/failures?threshold=${threshold}`);
  }

  runs() {
    return this.get<{ runs: RunDescriptor[] }>("/api/experiments");
  }

  radar(runId: string, against: string[]) {
    const suffix = against.length ? `?against=${against.join(",")}` : "";
    return this.get<RadarResponse>(`/api/experiments/${encodeURIComponent(runId)}/radar${suffix}`);
  }

  launchExperiment(config: SamplingDraft, strategy: object, label: string) {
    return this.post<{ run_id: string; job_id: string }>("/api/experiments", {
      config: {
        diversity: config.diversity,
        num_chunks: config.num_chunks,
        keywords: config.keywords,
        tags: config.tags,
        num_questions: config.num_questions,
        selection: config.selection,
        focus_question_id: config.focus_question_id,
      },
      strategy,
      label,
    });
  }

  jobStatus(jobId: string) {
    return this.get<{ job_id: string; status: string; error: string | null }>(`/api/jobs/${jobId}`);
  }
}
