/**
 * Client for the reconstruction service's /v1 endpoints.
 *
 * /v1/reconstruct answers multipart/form-data with a JSON "report" part and
 * a binary glTF "model" part; parseMultipart splits the raw bytes so the
 * client works the same in browsers and in node tests. A new submit aborts
 * any in-flight one (at most one pending preview).
 */

import type { Violation } from "./validation.js";

export interface ReconstructSuccess {
  ok: true;
  report: Record<string, unknown>;
  glb: ArrayBuffer;
}

export interface ReconstructFailure {
  ok: false;
  status: number;
  errorCode: string;
  violations: Violation[];
  detail: unknown;
}

export type ReconstructResult = ReconstructSuccess | ReconstructFailure;

export interface MultipartPart {
  name: string;
  contentType: string;
  body: Uint8Array;
}

export function parseMultipart(contentType: string, payload: Uint8Array): MultipartPart[] {
  const match = /boundary=([^;]+)/.exec(contentType);
  if (!match) throw new Error(`not multipart: ${contentType}`);
  // latin1 decoding is byte-preserving, so string indices equal byte offsets
  const text = new TextDecoder("latin1").decode(payload);
  const boundary = `--${match[1].trim()}`;
  const parts: MultipartPart[] = [];
  let cursor = text.indexOf(boundary);
  while (cursor >= 0) {
    const partStart = cursor + boundary.length;
    const next = text.indexOf(boundary, partStart);
    if (next < 0) break;
    const bodyStart = text.indexOf("\r\n\r\n", partStart);
    if (bodyStart >= 0 && bodyStart + 4 <= next) {
      const header = text.slice(partStart, bodyStart);
      const nameMatch = /name="([^"]+)"/.exec(header);
      const typeMatch = /Content-Type:\s*([^\r\n]+)/i.exec(header);
      // body runs to the CRLF that precedes the next boundary line
      parts.push({
        name: nameMatch ? nameMatch[1] : "",
        contentType: typeMatch ? typeMatch[1].trim() : "application/octet-stream",
        body: payload.slice(bodyStart + 4, next - 2),
      });
    }
    cursor = next;
  }
  return parts;
}

export class ApiClient {
  private inFlight: AbortController | null = null;

  constructor(
    public baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  async health(): Promise<boolean> {
    try {
      const res = await this.fetchImpl(`${this.baseUrl}/v1/health`);
      return res.ok;
    } catch {
      return false;
    }
  }

  async validate(docJson: string): Promise<{ valid: boolean; violations: Violation[] }> {
    const res = await this.fetchImpl(`${this.baseUrl}/v1/validate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: docJson,
    });
    const body = (await res.json()) as { valid?: boolean; violations?: Violation[]; error?: string };
    if (!res.ok) {
      return { valid: false, violations: [{ code: body.error ?? "parse_error", path: "", message: "" }] };
    }
    return { valid: Boolean(body.valid), violations: body.violations ?? [] };
  }

  /** POST the document for reconstruction, cancelling any pending submit. */
  async reconstruct(docJson: string, config?: Record<string, unknown>): Promise<ReconstructResult> {
    this.inFlight?.abort();
    const controller = new AbortController();
    this.inFlight = controller;
    const body = config ? `{"document":${docJson},"config":${JSON.stringify(config)}}` : docJson;
    const res = await this.fetchImpl(`${this.baseUrl}/v1/reconstruct`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
      signal: controller.signal,
    });
    if (this.inFlight === controller) this.inFlight = null;

    if (!res.ok) {
      const payload = (await res.json()) as Record<string, unknown>;
      return {
        ok: false,
        status: res.status,
        errorCode: String(payload.error ?? (payload.valid === false ? "validation_failed" : "unknown")),
        violations: (payload.violations as Violation[]) ?? [],
        detail: payload.detail ?? payload,
      };
    }
    const bytes = new Uint8Array(await res.arrayBuffer());
    const parts = parseMultipart(res.headers.get("content-type") ?? "", bytes);
    const reportPart = parts.find((p) => p.name === "report");
    const modelPart = parts.find((p) => p.name === "model");
    if (!reportPart || !modelPart) throw new Error("multipart response missing report or model part");
    const report = JSON.parse(new TextDecoder().decode(reportPart.body)) as Record<string, unknown>;
    const glb = new ArrayBuffer(modelPart.body.byteLength);
    new Uint8Array(glb).set(modelPart.body);
    return { ok: true, report, glb };
  }
}
