import { ApiClient } from "./api.js";
import { renderActivityChart } from "./panels/activity.js";
import { renderMap } from "./panels/map.js";
import { renderSuggestions } from "./panels/suggestions.js";
import { parseView, pushView, STAGE_LABELS, STAGES, StageView } from "./state.js";
import type { UserSummary } from "./types.js";

const api = new ApiClient();

let view: StageView = parseView(location.search);
let requestToken = 0;

function el<K extends keyof HTMLElementTagNameMap>(tag: K, className: string,
                                                   parent: HTMLElement) {
  const node = document.createElement(tag);
  node.className = className;
  parent.appendChild(node);
  return node;
}

const app = document.getElementById("app")!;
const header = el("header", "toolbar", app);
const title = el("h1", "app-title", header);
title.textContent = "User evolution explorer";
const userSelect = el("select", "user-select", header);
const stageBar = el("nav", "stage-bar", header);
const profileLine = el("p", "profile-line", app);

const grid = el("div", "panel-grid", app);
const mapPanel = el("section", "panel panel-map", grid);
el("h2", "panel-title", mapPanel).textContent = "Friends by country";
const mapBody = el("div", "panel-body", mapPanel);
const suggestionPanel = el("section", "panel panel-suggestions", grid);
el("h2", "panel-title", suggestionPanel).textContent = "Friend suggestions";
const suggestionBody = el("div", "panel-body", suggestionPanel);
const activityPanel = el("section", "panel panel-activity", grid);
el("h2", "panel-title", activityPanel).textContent = "User activities";
const activityBody = el("div", "panel-body", activityPanel);

const stageButtons = STAGES.map((stage) => {
  const button = document.createElement("button");
  button.textContent = STAGE_LABELS[stage];
  button.dataset.stage = String(stage);
  button.addEventListener("click", () => {
    view = { ...view, stage };
    pushView(view);
    void refresh();
  });
  stageBar.appendChild(button);
  return button;
});

userSelect.addEventListener("change", () => {
  view = { ...view, user: Number(userSelect.value) };
  pushView(view);
  void refresh();
});

window.addEventListener("popstate", () => {
  view = parseView(location.search);
  void refresh();
});

let users: UserSummary[] = [];

function renderChrome(): void {
  for (const button of stageButtons) {
    button.classList.toggle("active", Number(button.dataset.stage) === view.stage);
  }
  userSelect.value = String(view.user);
  const user = users.find((u) => u.id === view.user);
  profileLine.textContent = user
    ? `user ${user.id} — ${user.age}, ${user.gender}, ${user.occupation}, ${user.country}`
    : "";
}

async function refresh(): Promise<void> {
  renderChrome();
  const token = ++requestToken;
  try {
    const [suggestions, mapData, activities] = await Promise.all([
      api.suggestions(view.user, view.stage),
      api.map(view.user, view.stage),
      api.activities(view.user),
    ]);
    if (token !== requestToken) {
      return; // a newer selection superseded this response
    }
    renderSuggestions(suggestionBody, suggestions);
    renderMap(mapBody, mapData);
    renderActivityChart(activityBody, activities, view.stage);
  } catch (error) {
    if (token === requestToken) {
      suggestionBody.textContent = `failed to load: ${error}`;
    }
  }
}

async function boot(): Promise<void> {
  users = await api.users();
  userSelect.replaceChildren(...users.map((user) => {
    const option = document.createElement("option");
    option.value = String(user.id);
    option.textContent = `user ${user.id} (${user.country})`;
    return option;
  }));
  if (!users.some((u) => u.id === view.user)) {
    view = { ...view, user: users[0]?.id ?? 0 };
  }
  await refresh();
}

void boot();
