import type { ActivitiesResponse, MapResponse, Suggestion, UserSummary } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, path: string) {
    super(`${status} from ${path}`);
  }
}

export class ApiClient {
  constructor(private base: string = "") {}

  users(): Promise<UserSummary[]> {
    return this.get("/api/users");
  }

  suggestions(user: number, stage: number): Promise<Suggestion[]> {
    return this.get(`/api/users/${user}/suggestions?stage=${stage}`);
  }

  map(user: number, stage: number): Promise<MapResponse> {
    return this.get(`/api/users/${user}/map?stage=${stage}`);
  }

  activities(user: number): Promise<ActivitiesResponse> {
    return this.get(`/api/users/${user}/activities`);
  }

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path);
    if (!response.ok) {
      throw new ApiError(response.status, path);
    }
    return response.json() as Promise<T>;
  }
}
