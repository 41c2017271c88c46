// Wire shapes of the rating service. The client treats all ids as
// opaque strings and never invents fields the service did not send.

export type SessionStatus = "active" | "finished";

export interface ImageRef {
  image_id: string;
  url: string;
}

export interface GenerationPage {
  session_id: string;
  mode: string;
  generation: number;
  status: SessionStatus;
  images: ImageRef[];
  pending_participants: string[];
}

export interface BallotBody {
  participant_id: string;
  generation: number;
  ratings: Record<string, number>;
}

export interface BallotReply {
  accepted: boolean;
  generation_advanced: boolean;
  status: SessionStatus;
  generation: number;
  pending_participants: string[];
}

export interface FitnessHistoryEntry {
  generation: number;
  mean: number;
  stderr: number;
  fitness: number[];
}

export interface HallOfFameEntry {
  image_id: string;
  fitness: number;
  url: string;
}

export interface ResultsPayload {
  session_id: string;
  status: SessionStatus;
  generation: number;
  fitness_history: FitnessHistoryEntry[];
  hall_of_fame: HallOfFameEntry[];
}

// Pairwise evaluation. The service keeps which side holds the
// candidate to itself so respondents stay blind.
export interface TrialPage {
  trial_id: string;
  left: ImageRef;
  right: ImageRef;
}

export interface EvaluationPage {
  evaluation_id: string;
  session_id: string;
  condition: string;
  trials: TrialPage[];
  answered: Record<string, string[]>;
}

export type Side = "left" | "right";

export interface ResponseBody {
  respondent_id: string;
  trial_id: string;
  choice: Side;
}

export interface ResponseReply {
  accepted: boolean;
  responses: number;
}

export interface ErrorBody {
  error: string;
  message: string;
}
