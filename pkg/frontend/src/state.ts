// Stage/user selection, mirrored into the URL so views are shareable.

export type StageNumber = 1 | 2 | 3 | 4;

export const STAGES: StageNumber[] = [1, 2, 3, 4];

export const STAGE_LABELS: Record<StageNumber, string> = {
  1: "Next Evolution",
  2: "Second Evolution",
  3: "Third Evolution",
  4: "Fourth Evolution",
};

export interface StageView {
  user: number;
  stage: StageNumber;
}

export function parseView(search: string): StageView {
  const params = new URLSearchParams(search);
  const user = Number(params.get("user") ?? "0");
  const stage = Number(params.get("stage") ?? "1");
  return {
    user: Number.isInteger(user) && user >= 0 ? user : 0,
    stage: (STAGES as number[]).includes(stage) ? (stage as StageNumber) : 1,
  };
}

export function viewQuery(view: StageView): string {
  return `?user=${view.user}&stage=${view.stage}`;
}

export function pushView(view: StageView): void {
  history.pushState(null, "", viewQuery(view));
}
