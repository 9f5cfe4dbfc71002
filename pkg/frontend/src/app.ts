import type { Api } from "./api.js";
import { el } from "./dom.js";
import { ViewState } from "./state.js";
import { ChunkRelinkView } from "./views/chunklink.js";
import { EvidenceView } from "./views/evidence.js";
import { ForceGraphView } from "./views/forcegraph.js";
import { HeatmapView } from "./views/heatmap.js";
import { QuestionPanel } from "./views/questions.js";
import { SamplingPanel } from "./views/sampling.js";

/** Wires the six views together over one ViewState and the API client.
 * Selection anywhere re-fetches the details, chunk-relink and evidence
 * panels; the heatmap and force views highlight the same question. */
export class App {
  readonly root: HTMLElement;
  readonly state = new ViewState();
  readonly heatmap: HeatmapView;
  readonly force: ForceGraphView;
  readonly questions: QuestionPanel;
  readonly chunklink: ChunkRelinkView;
  readonly evidence: EvidenceView;
  readonly sampling: SamplingPanel;

  constructor(private readonly api: Api) {
    this.root = el("div", { class: "ragtrace-app" });
    this.heatmap = new HeatmapView(this.state, {
      onCellClick: (i, j) => void this.loadCellTopics(i, j),
    });
    this.force = new ForceGraphView(this.state);
    this.questions = new QuestionPanel(this.state, {
      onSearch: (query, preset, limit) => void this.runSearch(query, preset, limit),
    });
    this.chunklink = new ChunkRelinkView(this.state);
    this.evidence = new EvidenceView();
    this.sampling = new SamplingPanel(this.state, {
      onPreview: () => void this.loadPreview(),
      onLaunch: (label) => void this.launchRun(label),
    });
    for (const view of [this.heatmap, this.force, this.questions, this.chunklink, this.evidence, this.sampling]) {
      this.root.appendChild(view.root);
    }
    this.state.on("selection", () => void this.onSelection());
  }

  async bootstrap(): Promise<void> {
    try {
      this.heatmap.setProjection(await this.api.projection());
    } catch {
      // projection not fitted yet; the heatmap stays empty until it is
    }
    try {
      this.force.setFailures(await this.api.failures(0.5));
    } catch {
      // no runs yet
    }
  }

  async runSearch(query: string, preset: string, limit: number): Promise<void> {
    const response = await this.api.search(query, preset, limit);
    this.questions.setResults(response);
    this.heatmap.setSearched(response.results);
  }

  private async onSelection(): Promise<void> {
    const id = this.state.selectedQuestionId;
    if (!id) return;
    try {
      this.questions.setDetails(await this.api.questionDetails(id));
      this.chunklink.setData(await this.api.chunkRelink(id, this.state.activeStrategies));
      this.evidence.setData(await this.api.evidence(id));
    } catch {
      // panels for questions without records stay as they are
    }
  }

  private async loadCellTopics(i: number, j: number): Promise<void> {
    this.heatmap.showTopics(await this.api.cellTopics(i, j));
  }

  private async loadPreview(): Promise<void> {
    const response = await this.api.search("", "similarity", this.state.samplingDraft.num_questions);
    this.sampling.setPreview(response.results);
  }

  private async launchRun(label: string): Promise<void> {
    const { run_id, job_id } = await this.api.launchExperiment(
      this.state.samplingDraft,
      { kind: "plain", k: this.state.samplingDraft.num_chunks, keywords: this.state.samplingDraft.keywords },
      label,
    );
    await this.pollJob(job_id);
    const { runs } = await this.api.runs();
    const against = runs.map((r) => r.run_id).filter((r) => r !== run_id).slice(0, 2);
    const radar = await this.api.radar(run_id, against);
    this.sampling.setCharts(radar.charts);
  }

  private async pollJob(jobId: string, intervalMs = 250, maxAttempts = 400): Promise<void> {
    for (let attempt = 0; attempt < maxAttempts; attempt++) {
      const status = await this.api.jobStatus(jobId);
      if (status.status === "done") return;
      if (status.status === "failed") throw new Error(status.error ?? "job failed");
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
    throw new Error(`job ${jobId} timed out`);
  }
}
