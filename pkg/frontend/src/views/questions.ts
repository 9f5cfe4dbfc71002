import { clear, el } from "../dom.js";
import { fmt3, pct } from "../format.js";
import type { ViewState } from "../state.js";
import { METRIC_AXES, type QuestionDetails, type SearchResponse } from "../types.js";

const METRIC_COLORS: Record<string, string> = {
  retrieval_failure: "#d64541",
  prompt_fragility: "#f4b400",
  generation_anomaly: "#3b6fd4",
  standard_anomaly: "#8e44ad",
  correctness: "#2e9e5b",
  topic_relevance: "#16a2b8",
};

export interface QuestionPanelCallbacks {
  onSearch(query: string, preset: string, limit: number): void;
}

/** Search bar with preset selector and proportion slider, the ranked result
 * list, and the details pane: six metric progress bars plus the generated
 * answer and ground truth side by side. */
export class QuestionPanel {
  readonly root: HTMLElement;
  private resultsList: HTMLElement;
  private detailsPane: HTMLElement;
  private results: SearchResponse | null = null;
  private details: QuestionDetails | null = null;
  private proportion = 1.0;

  constructor(
    private readonly state: ViewState,
    private readonly callbacks: QuestionPanelCallbacks,
  ) {
    this.root = el("div", { class: "question-panel panel" });
    this.root.appendChild(el("h3", {}, "Question Search"));

    const form = el("form", { class: "search-form" });
    const input = el("input", { type: "search", name: "query", placeholder: "Search questions..." });
    const preset = el("select", { name: "preset" });
    for (const option of ["similarity", "high_hallucination", "improvement_potential"]) {
      preset.appendChild(el("option", { value: option }, option));
    }
    const slider = el("input", {
      type: "range", name: "proportion", min: 0.1, max: 1, step: 0.1, value: 1,
    });
    slider.addEventListener("input", () => {
      this.proportion = Number(slider.value);
      this.renderResults();
    });
    const button = el("button", { type: "submit" }, "Search");
    form.append(input, preset, slider, button);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      this.callbacks.onSearch(input.value, preset.value, 20);
    });
    this.root.appendChild(form);

    this.resultsList = el("ul", { class: "search-results" });
    this.root.appendChild(this.resultsList);
    this.detailsPane = el("div", { class: "question-details" });
    this.root.appendChild(this.detailsPane);
    state.on("selection", () => this.renderResults());
  }

  setResults(results: SearchResponse): void {
    this.results = results;
    this.renderResults();
  }

  setDetails(details: QuestionDetails): void {
    this.details = details;
    this.renderDetails();
  }

  private renderResults(): void {
    clear(this.resultsList);
    if (!this.results) return;
    const visible = Math.max(1, Math.round(this.results.results.length * this.proportion));
    for (const result of this.results.results.slice(0, visible)) {
      const selected = result.question_id === this.state.selectedQuestionId;
      const item = el("li", {
        class: `search-result${selected ? " selected" : ""}`,
        "data-question": result.question_id,
      });
      item.appendChild(el("span", { class: "result-text" }, result.text));
      item.appendChild(el("span", { class: "result-score" }, fmt3(result.score)));
      item.addEventListener("click", () => this.state.selectQuestion(result.question_id));
      this.resultsList.appendChild(item);
    }
  }

  private renderDetails(): void {
    clear(this.detailsPane);
    if (!this.details) return;
    const d = this.details;
    this.detailsPane.appendChild(el("h4", {}, `Question ${d.question_id}`));
    const meta = el("dl", { class: "question-meta" });
    meta.append(
      el("dt", {}, "Type"),
      el("dd", {}, d.tags.length ? d.tags.join(", ") : "untagged"),
      el("dt", {}, "Related chunks"),
      el("dd", {}, String(d.related_chunks)),
    );
    this.detailsPane.appendChild(meta);

    const bars = el("div", { class: "metric-bars" });
    for (const axis of METRIC_AXES) {
      const raw = d.metrics[axis];
      const scale = axis === "topic_relevance" ? (raw + 1) / 2 : raw;
      const row = el("div", { class: "metric-bar", "data-metric": axis });
      row.appendChild(el("span", { class: "metric-name" }, axis));
      const track = el("div", { class: "bar-track" });
      track.appendChild(
        el("div", {
          class: "bar-fill",
          style: `width:${pct(scale)};background:${METRIC_COLORS[axis]}`,
        }),
      );
      row.appendChild(track);
      row.appendChild(el("span", { class: "metric-value" }, fmt3(raw)));
      bars.appendChild(row);
    }
    this.detailsPane.appendChild(bars);

    const compare = el("div", { class: "answer-compare" });
    const answerCol = el("div", { class: "answer-col" });
    answerCol.append(el("h5", {}, "Model answer"), el("p", {}, d.answer_text ?? "(no answer)"));
    const truthCol = el("div", { class: "truth-col" });
    truthCol.append(el("h5", {}, "Ground truth"), el("p", {}, d.ground_truth ?? "(none)"));
    compare.append(answerCol, truthCol);
    this.detailsPane.appendChild(compare);
  }
}
