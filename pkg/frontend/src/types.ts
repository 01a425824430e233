export interface EncodeResponse {
  session_id: string;
  L: number;
  d: number;
  flat_len: number;
}

export interface AttributeInfo {
  name: string;
  level_mass: number[];
  argmax_level: number;
  train_accuracy: number;
}

export interface EditResult {
  image: Blob;
  logitBefore: number;
  logitAfter: number;
}

export interface HealthResponse {
  status: string;
  model_hash: string;
  L: number;
  d: number;
}

export interface EditParams {
  sessionId: string;
  attribute: string;
  alpha: number;
  k: number;
}

export interface MixParams {
  sessionA: string;
  sessionB: string;
  split: number;
}

export interface InterpolateParams {
  sessionA: string;
  sessionB: string;
  lambdas: number[];
  xTWeight: number;
}
