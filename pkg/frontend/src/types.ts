// Payload shapes served by the forecast API. The UI performs no prediction
// logic of its own; everything rendered comes straight from these objects.

export interface UserSummary {
  id: number;
  age: number;
  gender: string;
  occupation: string;
  country: string;
}

export interface Suggestion {
  id: number;
  confidence: number;
  country: string;
}

export interface MapMarker {
  id: number;
  country: string;
  confidence?: number;
}

export interface MapResponse {
  current: MapMarker[];
  predicted: MapMarker[];
}

export interface StagePrediction {
  stage: number;
  probs: number[];
}

export interface ActivitiesResponse {
  categories: string[];
  steps: number[];
  history: number[][];
  predicted: StagePrediction[];
}
