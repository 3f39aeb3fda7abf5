import { ApiClient, ApiError } from "./api.js";
import { renderTrajectory } from "./chart.js";
import { Session } from "./state.js";

// The interaction loop: enter procedures as they happen, watch the entropy
// trajectory, inspect the predicted diagnoses, and rank candidate next
// procedures by how much uncertainty they would remove.

const SHELL = `
  <div class="banner hidden" data-role="banner">
    <span data-role="banner-text"></span>
    <button type="button" data-role="banner-dismiss">dismiss</button>
  </div>
  <section class="entry">
    <input list="proc-codes" data-role="code-input"
           placeholder="procedure code" autocomplete="off" />
    <datalist id="proc-codes" data-role="code-options"></datalist>
    <button type="button" data-role="add">Add procedure</button>
    <button type="button" data-role="undo">Undo</button>
    <button type="button" data-role="whatif">What if?</button>
    <span class="prefix" data-role="prefix"></span>
  </section>
  <section class="panes">
    <figure>
      <figcaption>Entropy trajectory (bits), step 0 = before any procedure</figcaption>
      <svg data-role="chart" role="img"></svg>
    </figure>
    <div>
      <h2>Most likely diagnoses</h2>
      <table data-role="topk"><tbody></tbody></table>
      <h2>Candidate next procedures</h2>
      <ol data-role="whatif-list"></ol>
    </div>
  </section>
`;

export class App {
  readonly session = new Session();
  private readonly el: Record<string, HTMLElement>;

  constructor(root: HTMLElement, private readonly api: ApiClient) {
    root.innerHTML = SHELL;
    this.el = {};
    for (const node of root.querySelectorAll<HTMLElement>("[data-role]")) {
      this.el[node.dataset.role!] = node;
    }
    this.el["add"].addEventListener("click", () => void this.addProcedure());
    this.el["undo"].addEventListener("click", () => this.undo());
    this.el["whatif"].addEventListener("click", () => void this.runWhatIf());
    this.el["banner-dismiss"].addEventListener("click", () => this.hideBanner());
    this.el["code-input"].addEventListener("input", () => void this.refreshOptions());
    this.el["code-input"].addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter") void this.addProcedure();
    });
  }

  async start(): Promise<void> {
    try {
      this.session.commitInitial(await this.api.predict([]));
      this.render();
    } catch (err) {
      this.showError(err);
    }
  }

  async addProcedure(code?: string): Promise<void> {
    const input = this.el["code-input"] as HTMLInputElement;
    const entered = (code ?? input.value).trim();
    if (!entered) return;
    try {
      const response = await this.api.predict([...this.session.prefix, entered]);
      this.session.commitAdd(entered, response);
      input.value = "";
      this.render();
    } catch (err) {
      this.showError(err);
    }
  }

  undo(): void {
    if (this.session.undo()) this.render();
  }

  async runWhatIf(): Promise<void> {
    try {
      this.session.commitWhatIf(await this.api.whatIf([...this.session.prefix]));
      this.render();
    } catch (err) {
      this.showError(err);
    }
  }

  async refreshOptions(): Promise<void> {
    const input = this.el["code-input"] as HTMLInputElement;
    try {
      const codes = await this.api.searchProcedures(input.value.trim());
      this.el["code-options"].innerHTML = "";
      for (const code of codes) {
        const option = document.createElement("option");
        option.value = code;
        this.el["code-options"].appendChild(option);
      }
    } catch {
      // autocomplete is best-effort; entry by hand still works
    }
  }

  render(): void {
    renderTrajectory(this.el["chart"] as unknown as SVGSVGElement, this.session.trajectory);
    this.el["prefix"].textContent = this.session.prefix.join(" → ");

    const tbody = this.el["topk"].querySelector("tbody")!;
    tbody.innerHTML = "";
    for (const entry of this.session.last?.top_k ?? []) {
      const row = document.createElement("tr");
      row.innerHTML = `<td>${entry.code}</td><td>${entry.probability.toFixed(4)}</td>`;
      tbody.appendChild(row);
    }

    const list = this.el["whatif-list"];
    list.innerHTML = "";
    for (const row of this.session.whatIf?.ranked ?? []) {
      const item = document.createElement("li");
      item.dataset.code = row.code;
      const badge = row.delta_bits < 0 ? "delta-down" : row.delta_bits > 0 ? "delta-up" : "delta-flat";
      const sign = row.delta_bits > 0 ? "+" : "";
      item.innerHTML =
        `<span class="code">${row.code}</span>` +
        `<span class="posterior">${row.posterior_entropy_bits.toFixed(4)} bits</span>` +
        `<span class="badge ${badge}">${sign}${row.delta_bits.toFixed(4)}</span>`;
      list.appendChild(item);
    }
  }

  showError(err: unknown): void {
    if (err instanceof DOMException && err.name === "AbortError") return; // superseded
    const message = err instanceof ApiError ? err.message : String(err);
    this.el["banner-text"].textContent = message;
    this.el["banner"].classList.remove("hidden");
  }

  hideBanner(): void {
    this.el["banner"].classList.add("hidden");
  }
}
