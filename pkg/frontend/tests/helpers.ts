import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { Api } from "../src/api.js";
import type {
  CellTopics,
  ChunkRelink,
  EvidenceResponse,
  FailuresResponse,
  ProjectionExport,
  QuestionDetails,
  RadarResponse,
  RunDescriptor,
  SearchResponse,
} from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "..", "fixtures", `${name}.json`), "utf-8")) as T;
}

/** Serves the recorded fixtures; the UI is a pure function of these. */
export class FixtureApi implements Api {
  calls: string[] = [];

  async projection(): Promise<ProjectionExport> {
    this.calls.push("projection");
    return fixture("projection");
  }

  async cellTopics(i: number, j: number): Promise<CellTopics> {
    this.calls.push(`cellTopics:${i},${j}`);
    return { cell: { i, j }, keywords: [{ term: "spike", score: 1.0 }] };
  }

  async search(query: string, preset: string, limit: number): Promise<SearchResponse> {
    this.calls.push(`search:${query}:${preset}:${limit}`);
    return fixture("search");
  }

  async questionDetails(id: string): Promise<QuestionDetails> {
    this.calls.push(`details:${id}`);
    return fixture("details");
  }

  async chunkRelink(id: string, strategies: string[]): Promise<ChunkRelink> {
    this.calls.push(`chunklink:${id}:${strategies.join(",")}`);
    return fixture("chunklink");
  }

  async evidence(id: string): Promise<EvidenceResponse> {
    this.calls.push(`evidence:${id}`);
    return fixture("evidence");
  }

  async failures(threshold: number): Promise<FailuresResponse> {
    this.calls.push(`failures:${threshold}`);
    return fixture("failures");
  }

  async runs(): Promise<{ runs: RunDescriptor[] }> {
    this.calls.push("runs");
    return fixture("runs");
  }

  async radar(runId: string, against: string[]): Promise<RadarResponse> {
    this.calls.push(`radar:${runId}:${against.join(",")}`);
    return fixture("radar");
  }

  async launchExperiment(): Promise<{ run_id: string; job_id: string }> {
    this.calls.push("launch");
    return { run_id: "r-fixture", job_id: "j-fixture" };
  }

  async jobStatus(jobId: string): Promise<{ job_id: string; status: string; error: string | null }> {
    this.calls.push(`job:${jobId}`);
    return { job_id: jobId, status: "done", error: null };
  }
}
