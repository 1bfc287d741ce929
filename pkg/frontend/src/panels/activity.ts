import type { ActivitiesResponse } from "../types.js";
import type { StageNumber } from "../state.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 720;
const HEIGHT = 280;
const PAD = { left: 36, right: 16, top: 10, bottom: 24 };

export const SERIES_COLORS = [
  "#4363d8", "#e6194b", "#3cb44b", "#f58231",
  "#911eb4", "#46f0f0", "#808000", "#f032e6",
];

function scaleX(slot: number, slots: number): number {
  return PAD.left + (slot / Math.max(slots - 1, 1)) * (WIDTH - PAD.left - PAD.right);
}

function scaleY(value: number): number {
  return HEIGHT - PAD.bottom - value * (HEIGHT - PAD.top - PAD.bottom);
}

/** Eight solid history lines plus one dashed predicted segment per category.

The dashed segment spans from the final observed point to the selected
stage's predicted share, offset one stage-width to the right per stage.
*/
export function renderActivityChart(root: HTMLElement, data: ActivitiesResponse,
                                    stage: StageNumber): void {
  root.replaceChildren();
  const steps = data.history.length;
  const slots = steps + 4; // room for the four forecast stages
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "activity-chart");

  const axis = document.createElementNS(SVG_NS, "line");
  axis.setAttribute("x1", String(PAD.left));
  axis.setAttribute("x2", String(WIDTH - PAD.right));
  axis.setAttribute("y1", String(scaleY(0)));
  axis.setAttribute("y2", String(scaleY(0)));
  axis.setAttribute("class", "axis");
  svg.appendChild(axis);

  const nowDivider = document.createElementNS(SVG_NS, "line");
  nowDivider.setAttribute("x1", String(scaleX(steps - 1, slots)));
  nowDivider.setAttribute("x2", String(scaleX(steps - 1, slots)));
  nowDivider.setAttribute("y1", String(PAD.top));
  nowDivider.setAttribute("y2", String(HEIGHT - PAD.bottom));
  nowDivider.setAttribute("class", "now-divider");
  svg.appendChild(nowDivider);

  const prediction = data.predicted.find((p) => p.stage === stage);
  for (let c = 0; c < data.categories.length; c += 1) {
    const points = data.history
      .map((row, t) => `${scaleX(t, slots).toFixed(1)},${scaleY(row[c]).toFixed(1)}`)
      .join(" ");
    const line = document.createElementNS(SVG_NS, "polyline");
    line.setAttribute("points", points);
    line.setAttribute("class", `series series-${c}`);
    line.setAttribute("stroke", SERIES_COLORS[c % SERIES_COLORS.length]);
    line.dataset.category = data.categories[c];
    svg.appendChild(line);

    if (prediction) {
      const lastValue = data.history[steps - 1][c];
      const segment = document.createElementNS(SVG_NS, "line");
      segment.setAttribute("x1", String(scaleX(steps - 1, slots)));
      segment.setAttribute("y1", String(scaleY(lastValue)));
      segment.setAttribute("x2", String(scaleX(steps - 1 + stage, slots)));
      segment.setAttribute("y2", String(scaleY(prediction.probs[c])));
      segment.setAttribute("class", "predicted-segment");
      segment.setAttribute("stroke", SERIES_COLORS[c % SERIES_COLORS.length]);
      segment.dataset.category = data.categories[c];
      svg.appendChild(segment);
    }
  }
  root.appendChild(svg);

  const legend = document.createElement("p");
  legend.className = "chart-legend";
  legend.innerHTML = data.categories
    .map((name, c) =>
      `<span class="legend-item" style="color:${SERIES_COLORS[c % SERIES_COLORS.length]}">` +
      `&#9644; ${name}</span>`)
    .join(" ");
  root.appendChild(legend);
}
