/** DOM layer: renders TriageViewState into the console layout. */

import { Progress } from "./api.js";
import { TriageController, TriageViewState } from "./state.js";

export function buildLayout(root: HTMLElement): void {
  root.innerHTML = `
    <header class="bar">
      <h1>Triage Console</h1>
      <span id="budget" class="budget"></span>
    </header>
    <div id="banner" class="banner" hidden>
      <span id="banner-text"></span>
      <button id="retry" type="button">Retry</button>
    </div>
    <main class="cols">
      <section class="meta">
        <dl>
          <dt>Title</dt><dd id="meta-title"></dd>
          <dt>URL</dt><dd id="meta-url"></dd>
          <dt>Scheme</dt><dd id="meta-scheme"></dd>
          <dt>Group size</dt><dd id="meta-size"></dd>
          <dt>Neighbors on remove</dt><dd id="meta-neighbors"></dd>
        </dl>
        <div class="controls">
          <button id="keep" type="button" title="shortcut: K">Keep (K)</button>
          <button id="remove" type="button" title="shortcut: R">Remove (R)</button>
        </div>
        <div id="toast" class="toast" hidden></div>
        <div id="done" class="done" hidden>Budget exhausted. Triage complete.</div>
        <section class="progress">
          <h2>Progress</h2>
          <div id="bars"></div>
          <p id="counters"></p>
        </section>
      </section>
      <section class="preview">
        <iframe id="preview" sandbox="" referrerpolicy="no-referrer" title="sanitized page preview"></iframe>
      </section>
    </main>`;
}

function budgetBar(scheme: string, total: number, remaining: number): string {
  const used = total - remaining;
  const pct = total > 0 ? Math.round((used / total) * 100) : 0;
  return `<div class="bar-row" data-scheme="${scheme}">
    <span class="bar-label">${scheme}</span>
    <span class="bar-track"><span class="bar-fill" style="width:${pct}%"></span></span>
    <span class="bar-count">${used}/${total}</span>
  </div>`;
}

export function renderProgress(root: HTMLElement, progress: Progress | null): void {
  const bars = root.querySelector<HTMLElement>("#bars");
  const counters = root.querySelector<HTMLElement>("#counters");
  if (!bars || !counters || !progress) return;
  bars.innerHTML = Object.keys(progress.budget_per_scheme)
    .sort()
    .map((scheme) =>
      budgetBar(
        scheme,
        progress.budget_per_scheme[scheme] ?? 0,
        progress.budget_remaining[scheme] ?? 0,
      ),
    )
    .join("");
  const rate = (progress.rejection_rate_so_far * 100).toFixed(2);
  counters.textContent =
    `${progress.inspected} inspected, ${progress.removed_total} removed, ` +
    `rejection rate ${rate}%`;
}

export function render(root: HTMLElement, state: TriageViewState): void {
  const busy = state.phase === "submitting" || state.phase === "loading";
  const keep = root.querySelector<HTMLButtonElement>("#keep");
  const remove = root.querySelector<HTMLButtonElement>("#remove");
  if (keep) keep.disabled = busy || state.phase !== "ready";
  if (remove) remove.disabled = busy || state.phase !== "ready";

  const set = (id: string, text: string) => {
    const el = root.querySelector<HTMLElement>(id);
    if (el) el.textContent = text;
  };
  const proto = state.prototype;
  set("#meta-title", proto?.title ?? "(no title)");
  set("#meta-url", proto?.url ?? "");
  set("#meta-scheme", proto ? `${proto.group_scheme}` : "");
  set("#meta-size", proto ? String(proto.group_size) : "");
  set("#meta-neighbors", proto ? String(proto.neighbor_count + 1) : "");
  set("#budget", proto ? `budget left: ${state.budgetRemaining}` : "");

  const frame = root.querySelector<HTMLIFrameElement>("#preview");
  if (frame) {
    // sandbox="" forbids script execution and navigation regardless of the
    // (already sanitized) document served by the service
    frame.setAttribute("sandbox", "");
    const src = state.previewSrc ?? "about:blank";
    if (frame.getAttribute("src") !== src) frame.setAttribute("src", src);
  }

  const toast = root.querySelector<HTMLElement>("#toast");
  if (toast) {
    toast.hidden = state.toast === null;
    toast.textContent = state.toast ?? "";
  }
  const done = root.querySelector<HTMLElement>("#done");
  if (done) done.hidden = state.phase !== "done";
  const banner = root.querySelector<HTMLElement>("#banner");
  const bannerText = root.querySelector<HTMLElement>("#banner-text");
  if (banner && bannerText) {
    banner.hidden = state.errorBanner === null;
    bannerText.textContent = state.errorBanner ?? "";
  }
  renderProgress(root, state.progress);
}

export function wire(root: HTMLElement, controller: TriageController): void {
  buildLayout(root);
  controller.subscribe((state) => render(root, state));
  root.querySelector("#keep")?.addEventListener("click", () => void controller.submit("keep"));
  root.querySelector("#remove")?.addEventListener("click", () => void controller.submit("remove"));
  root.querySelector("#retry")?.addEventListener("click", () => void controller.retry());
  document.addEventListener("keydown", (event) => {
    if (event.repeat) return;
    const key = event.key.toLowerCase();
    if (key === "k") void controller.submit("keep");
    else if (key === "r") void controller.submit("remove");
  });
}
