// Session archive emission in the fuzzer's published schema (version 1).
//
// An archive is a JSON object with base64-encoded bodies; the fuzzer
// loads it directly, so fixtures ship with a pre-recorded session and
// never need a live capture step.

export interface ExchangeSpec {
  method?: string;
  url: string;
  requestHeaders?: [string, string][];
  requestBody?: Buffer;
  status?: number;
  responseHeaders: [string, string][];
  responseBody: Buffer;
}

export interface SessionSpec {
  exchanges: ExchangeSpec[];
  targetIndex: number;
  notes?: string;
}

// fixed timestamp: committed archives must not change between builds
const CREATED_AT = "2026-01-01T00:00:00+00:00";

export const SCHEMA_VERSION = 1;

export function sessionArchive(spec: SessionSpec): string {
  if (spec.targetIndex < 0 || spec.targetIndex >= spec.exchanges.length) {
    throw new Error(`target index ${spec.targetIndex} out of range`);
  }
  const exchanges = spec.exchanges.map((exchange, index) => ({
    method: exchange.method ?? "GET",
    url: exchange.url,
    request_headers: exchange.requestHeaders ?? [["Accept", "*/*"]],
    request_body_b64: (exchange.requestBody ?? Buffer.alloc(0)).toString("base64"),
    status: exchange.status ?? 200,
    response_headers: exchange.responseHeaders,
    response_body_b64: exchange.responseBody.toString("base64"),
    sequence_no: index,
  }));
  const archive = {
    schema_version: SCHEMA_VERSION,
    created_at: CREATED_AT,
    target_index: spec.targetIndex,
    notes: spec.notes ?? "",
    exchanges,
  };
  return `${JSON.stringify(archive, null, 1)}\n`;
}
