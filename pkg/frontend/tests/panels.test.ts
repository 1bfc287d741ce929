// UI fidelity against recorded API fixtures: the panels are a pure view
// over the payloads, with no client-side prediction or re-sorting.

import { beforeEach, describe, expect, it } from "vitest";

import { renderActivityChart } from "../src/panels/activity.js";
import { renderMap } from "../src/panels/map.js";
import { renderSuggestions } from "../src/panels/suggestions.js";
import { parseView, STAGE_LABELS, STAGES, viewQuery } from "../src/state.js";
import type { ActivitiesResponse, MapResponse, Suggestion } from "../src/types.js";

import activitiesFixture from "./fixtures/activities.json";
import mapStage1 from "./fixtures/map_stage1.json";
import mapStage2 from "./fixtures/map_stage2.json";
import suggestionsStage1 from "./fixtures/suggestions_stage1.json";

const activities = activitiesFixture as ActivitiesResponse;
const maps = { 1: mapStage1 as MapResponse, 2: mapStage2 as MapResponse };
const suggestions = suggestionsStage1 as Suggestion[];

let root: HTMLElement;

beforeEach(() => {
  root = document.createElement("div");
  document.body.replaceChildren(root);
});

describe("activity chart", () => {
  it("renders exactly eight history series", () => {
    renderActivityChart(root, activities, 1);
    expect(root.querySelectorAll("polyline.series")).toHaveLength(8);
  });

  it("draws one dashed predicted segment per category for the stage", () => {
    renderActivityChart(root, activities, 2);
    const segments = root.querySelectorAll("line.predicted-segment");
    expect(segments).toHaveLength(8);
    const categories = [...segments].map((s) => (s as SVGElement).dataset.category);
    expect(categories).toEqual(activities.categories);
  });

  it("predicted segment endpoints move when the stage changes", () => {
    renderActivityChart(root, activities, 1);
    const first = [...root.querySelectorAll("line.predicted-segment")]
      .map((s) => s.getAttribute("x2"));
    renderActivityChart(root, activities, 3);
    const third = [...root.querySelectorAll("line.predicted-segment")]
      .map((s) => s.getAttribute("x2"));
    expect(third).not.toEqual(first);
  });
});

describe("suggestion panel", () => {
  it("renders entries in exactly the API payload order", () => {
    renderSuggestions(root, suggestions);
    const ids = [...root.querySelectorAll("li")].map((li) => Number(li.dataset.id));
    expect(ids).toEqual(suggestions.map((s) => s.id));
  });

  it("does not re-sort a deliberately scrambled payload", () => {
    const scrambled = [...suggestions].reverse();
    renderSuggestions(root, scrambled);
    const ids = [...root.querySelectorAll("li")].map((li) => Number(li.dataset.id));
    expect(ids).toEqual(scrambled.map((s) => s.id));
  });

  it("shows a note when there is nothing to suggest", () => {
    renderSuggestions(root, []);
    expect(root.querySelector(".empty-note")).not.toBeNull();
    expect(root.querySelectorAll("li")).toHaveLength(0);
  });
});

describe("country map", () => {
  const redSet = (data: MapResponse): string[] => {
    renderMap(root, data);
    return [...root.querySelectorAll("circle.marker-predicted")]
      .map((c) => (c as SVGElement).dataset.id!)
      .sort();
  };

  it("marks current connections green and predicted ones red", () => {
    renderMap(root, maps[1]);
    expect(root.querySelectorAll("circle.marker-current"))
      .toHaveLength(maps[1].current.length);
    expect(root.querySelectorAll("circle.marker-predicted"))
      .toHaveLength(maps[1].predicted.length);
  });

  it("green markers carry exactly the current-connection ids", () => {
    renderMap(root, maps[1]);
    const ids = [...root.querySelectorAll("circle.marker-current")]
      .map((c) => Number((c as SVGElement).dataset.id))
      .sort((a, b) => a - b);
    expect(ids).toEqual(maps[1].current.map((m) => m.id).sort((a, b) => a - b));
  });

  it("changes the red marker set between stages 1 and 2", () => {
    const stage1 = redSet(maps[1]);
    const stage2 = redSet(maps[2]);
    const withConfidence = (data: MapResponse) =>
      data.predicted.map((m) => `${m.id}:${m.confidence?.toFixed(4)}`).sort();
    expect(
      stage1.join() !== stage2.join() ||
      withConfidence(maps[1]).join() !== withConfidence(maps[2]).join(),
    ).toBe(true);
    // and the rendered circles reflect the change (position or size)
    const render = (data: MapResponse) => {
      renderMap(root, data);
      return [...root.querySelectorAll("circle.marker-predicted")]
        .map((c) => `${(c as SVGElement).dataset.id}@${c.getAttribute("cx")},` +
                    `${c.getAttribute("cy")}r${c.getAttribute("r")}`)
        .sort();
    };
    expect(render(maps[1])).not.toEqual(render(maps[2]));
  });
});

describe("stage view state", () => {
  it("maps the four stage labels onto API stages 1..4", () => {
    expect(STAGES).toEqual([1, 2, 3, 4]);
    expect(Object.keys(STAGE_LABELS).map(Number).sort()).toEqual([1, 2, 3, 4]);
    expect(STAGE_LABELS[1]).toContain("Next");
    expect(STAGE_LABELS[4]).toContain("Fourth");
  });

  it("round-trips through the URL query", () => {
    for (const stage of STAGES) {
      const view = { user: 7, stage };
      expect(parseView(viewQuery(view))).toEqual(view);
    }
  });

  it("falls back to defaults on garbage queries", () => {
    expect(parseView("?user=-3&stage=9")).toEqual({ user: 0, stage: 1 });
    expect(parseView("")).toEqual({ user: 0, stage: 1 });
  });
});
