/** Browser glue: wires the editor, service client, gallery, and history
 * into the single-page mask studio. All numerics come from the service.
 */

import { Client, GenerateResult, ModelInfo } from "./api.js";
import { SessionHistory } from "./history.js";
import { HULL_COMPONENTS, MaskEditorState } from "./maskState.js";
import { buildRequest } from "./requests.js";
import { DesignView, FIXED_STYLE, GENERATED_STYLE, formatBadge, galleryViews, mapeBadge } from "./render.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const client = new Client("");
const history = new SessionHistory();
let models: ModelInfo[] = [];
let model: ModelInfo | null = null;
let state: MaskEditorState | null = null;

function editorMode(info: ModelInfo): "tabular" | "airfoil" {
  return info.kind === "airfoil" ? "airfoil" : "tabular";
}

function renderEditor(): void {
  if (!model || !state) return;
  const host = $("editor");
  host.innerHTML = "";
  if (state.mode === "airfoil") {
    const label = document.createElement("label");
    label.textContent = `fixed prefix: ${state.prefixEighths}/8 `;
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = "8";
    slider.step = "1";
    slider.value = String(state.prefixEighths);
    slider.oninput = () => {
      state!.setPrefix(Number(slider.value));
      renderEditor();
    };
    label.appendChild(slider);
    host.appendChild(label);
  } else {
    if (model.schema.names.length >= 44) {
      const presets = document.createElement("div");
      for (const name of Object.keys(HULL_COMPONENTS)) {
        const btn = document.createElement("button");
        btn.textContent = `fix ${name}`;
        btn.onclick = () => {
          state!.applyComponent(name);
          renderEditor();
        };
        presets.appendChild(btn);
      }
      host.appendChild(presets);
    }
    const table = document.createElement("table");
    model.schema.names.forEach((name, i) => {
      const tr = document.createElement("tr");
      tr.className = state!.fixed[i] ? "fixed" : "";
      const check = document.createElement("input");
      check.type = "checkbox";
      check.checked = state!.fixed[i];
      check.onchange = () => {
        state!.fixed[i] = check.checked;
        renderEditor();
      };
      const value = document.createElement("input");
      value.type = "number";
      value.step = "any";
      value.value = String(state!.pinned[i]);
      value.onchange = () => {
        state!.setPin(i, Number(value.value));
        renderEditor();
      };
      const cells = [check, document.createTextNode(name), value];
      for (const c of cells) {
        const td = document.createElement("td");
        td.appendChild(c);
        tr.appendChild(td);
      }
      table.appendChild(tr);
    });
    host.appendChild(table);
  }
  $("mask-spec").textContent = state.toSpec() || "(nothing fixed)";
}

function drawAirfoil(canvas: HTMLCanvasElement, view: DesignView): void {
  if (view.kind !== "airfoil") return;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const pad = 10;
  const sx = (x: number) => pad + x * (canvas.width - 2 * pad);
  const ys = view.points.map((p) => p.y);
  const ymin = Math.min(...ys, -0.05);
  const ymax = Math.max(...ys, 0.05);
  const sy = (y: number) =>
    canvas.height - pad - ((y - ymin) / (ymax - ymin)) * (canvas.height - 2 * pad);
  for (const surface of ["upper", "lower"] as const) {
    const pts = view.points.filter((p) => p.surface === surface);
    ctx.beginPath();
    pts.forEach((p, i) => (i === 0 ? ctx.moveTo(sx(p.x), sy(p.y)) : ctx.lineTo(sx(p.x), sy(p.y))));
    ctx.strokeStyle = "#666";
    ctx.stroke();
  }
  for (const p of view.points) {
    const style = p.fixed ? FIXED_STYLE : GENERATED_STYLE;
    ctx.fillStyle = style.color;
    ctx.beginPath();
    if (style.marker === "triangle") {
      ctx.moveTo(sx(p.x), sy(p.y) - 4);
      ctx.lineTo(sx(p.x) - 4, sy(p.y) + 3);
      ctx.lineTo(sx(p.x) + 4, sy(p.y) + 3);
      ctx.closePath();
    } else {
      ctx.arc(sx(p.x), sy(p.y), 3, 0, 2 * Math.PI);
    }
    ctx.fill();
  }
}

function renderGallery(result: GenerateResult): void {
  const host = $("gallery");
  host.innerHTML = "";
  const views = galleryViews(result);
  const perfs = result.designs
    .map((d) => d.predicted_performance)
    .filter((v): v is number => v !== null);
  const badge = mapeBadge(perfs, result.condition.target);
  $("batch-badge").textContent =
    `target ${result.condition.target} | batch MAPE ${formatBadge(badge)}`;
  views.forEach((view) => {
    const card = document.createElement("div");
    card.className = "card";
    if (view.kind === "airfoil") {
      const canvas = document.createElement("canvas");
      canvas.width = 260;
      canvas.height = 120;
      card.appendChild(canvas);
      drawAirfoil(canvas, view);
    } else {
      const table = document.createElement("table");
      view.rows.forEach((row) => {
        const tr = document.createElement("tr");
        tr.className = row.fixed ? "fixed" : "";
        tr.innerHTML = `<td>${row.name}</td><td>${row.value.toPrecision(6)}</td>` +
          `<td>${row.fixed ? "fixed" : "generated"}</td>`;
        table.appendChild(tr);
      });
      card.appendChild(table);
    }
    const tag = document.createElement("p");
    tag.textContent =
      `predicted ${view.predicted === null ? "n/a" : view.predicted.toPrecision(5)}` +
      (view.feasible === null ? "" : view.feasible ? " | feasible" : " | infeasible");
    card.appendChild(tag);
    host.appendChild(card);
  });
}

function renderHistory(): void {
  const host = $("history");
  host.innerHTML = "";
  for (const entry of history.list()) {
    const li = document.createElement("li");
    const mape = entry.summary.mapeVsTarget;
    li.textContent =
      `#${entry.index} target ${entry.request.condition.target} seed ${entry.request.seed} ` +
      `mask "${entry.request.mask_spec}" -> ${entry.summary.nDesigns} designs` +
      (mape === null ? "" : ` (MAPE ${mape.toFixed(2)}%)`);
    const btn = document.createElement("button");
    btn.textContent = "restore";
    btn.onclick = () => {
      state = history.restore(entry.index);
      ($("target") as HTMLInputElement).value = String(entry.request.condition.target);
      ($("seed") as HTMLInputElement).value = String(entry.request.seed);
      renderEditor();
    };
    li.appendChild(btn);
    host.appendChild(li);
  }
}

async function generate(): Promise<void> {
  if (!model || !state) return;
  const status = $("status");
  try {
    const request = buildRequest(
      model.id,
      state,
      {
        target: Number(($("target") as HTMLInputElement).value),
        gamma: model.has_classifier ? Number(($("gamma") as HTMLInputElement).value) : null,
        lambda: model.has_predictor ? Number(($("lambda") as HTMLInputElement).value) : null,
        resampleU: Number(($("resample") as HTMLInputElement).value),
      },
      Number(($("count") as HTMLInputElement).value),
      Number(($("seed") as HTMLInputElement).value),
    );
    status.textContent = "submitting...";
    const { job_id } = await client.generate(request);
    const job = await client.waitForJob(job_id, {
      onProgress: (p) => (status.textContent = `running ${(p * 100).toFixed(0)}%`),
    });
    if (job.state === "failed") {
      status.textContent = `failed: ${job.error}`;
      return;
    }
    const result = await client.jobResult(job_id);
    history.record(state, request, result);
    renderGallery(result);
    renderHistory();
    status.textContent = "done";
  } catch (err) {
    status.textContent = `error: ${err instanceof Error ? err.message : err}`;
  }
}

async function start(): Promise<void> {
  models = await client.listModels();
  const select = $("model") as HTMLSelectElement;
  select.innerHTML = "";
  for (const m of models) {
    const opt = document.createElement("option");
    opt.value = m.id;
    opt.textContent = `${m.id} (${m.kind}, dim ${m.schema.names.length})`;
    select.appendChild(opt);
  }
  const pick = () => {
    model = models.find((m) => m.id === select.value) ?? models[0];
    state = new MaskEditorState(editorMode(model), model.schema.names.length);
    renderEditor();
  };
  select.onchange = pick;
  if (models.length) {
    select.value = models[0].id;
    pick();
  }
  $("generate").onclick = () => void generate();
}

window.addEventListener("DOMContentLoaded", () => void start());
