/**
 * Line-protocol client for the rebalancing environment service.
 *
 * One JSON object per line over TCP. A session serves one episode at a
 * time: reset -> reset_ok, then step -> step_ok until done; errors come
 * back as {kind: "error", code} and leave the session alive.
 */

import * as net from "node:net";

export interface Observation {
  V: number[];
  R: number[];
  tNorm: number;
  reward: number;
  done: boolean;
}

export interface ServerMessage {
  kind: string;
  V?: number[];
  R?: number[];
  t_norm?: number;
  reward?: number;
  done?: boolean;
  code?: string;
}

export class ProtocolFailure extends Error {
  constructor(public readonly code: string) {
    super(`environment error: ${code}`);
  }
}

export class EnvClient {
  private socket: net.Socket | null = null;
  private buffer = "";
  private pending: {
    resolve: (m: ServerMessage) => void;
    reject: (e: Error) => void;
  } | null = null;

  constructor(
    private readonly host: string,
    private readonly port: number,
  ) {}

  async connect(): Promise<void> {
    await new Promise<void>((resolve, reject) => {
      const socket = net.createConnection({ host: this.host, port: this.port });
      socket.setNoDelay(true);
      socket.once("connect", () => {
        socket.removeAllListeners("error");
        this.socket = socket;
        this.wire(socket);
        resolve();
      });
      socket.once("error", reject);
    });
  }

  private wire(socket: net.Socket): void {
    socket.on("data", (chunk) => {
      this.buffer += chunk.toString("utf-8");
      let idx: number;
      while ((idx = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, idx).trim();
        this.buffer = this.buffer.slice(idx + 1);
        if (!line) continue;
        const waiter = this.pending;
        this.pending = null;
        if (waiter) waiter.resolve(JSON.parse(line) as ServerMessage);
      }
    });
    const fail = (err: Error) => {
      const waiter = this.pending;
      this.pending = null;
      if (waiter) waiter.reject(err);
    };
    socket.on("error", fail);
    socket.on("close", () => fail(new Error("connection closed")));
  }

  private request(payload: object): Promise<ServerMessage> {
    if (!this.socket) return Promise.reject(new Error("not connected"));
    if (this.pending) return Promise.reject(new Error("request in flight"));
    return new Promise((resolve, reject) => {
      this.pending = { resolve, reject };
      this.socket!.write(JSON.stringify(payload) + "\n");
    });
  }

  private toObservation(msg: ServerMessage): Observation {
    if (msg.kind === "error") throw new ProtocolFailure(msg.code ?? "UNKNOWN");
    return {
      V: msg.V!,
      R: msg.R!,
      tNorm: msg.t_norm!,
      reward: msg.reward!,
      done: msg.done!,
    };
  }

  async reset(scenario: string, seed: number): Promise<Observation> {
    return this.toObservation(await this.request({ kind: "reset", scenario, seed }));
  }

  async step(action: number[]): Promise<Observation> {
    return this.toObservation(await this.request({ kind: "step", action }));
  }

  async close(): Promise<void> {
    if (!this.socket) return;
    try {
      await this.request({ kind: "close" });
    } catch {
      // server may close the connection before replying
    }
    this.socket.destroy();
    this.socket = null;
  }
}

/** Connect with retries and exponential backoff; rethrows after maxTries. */
export async function connectWithRetry(
  host: string,
  port: number,
  maxTries = 5,
  baseDelayMs = 250,
): Promise<EnvClient> {
  let lastError: unknown = null;
  for (let attempt = 0; attempt < maxTries; attempt++) {
    const client = new EnvClient(host, port);
    try {
      await client.connect();
      return client;
    } catch (err) {
      lastError = err;
      await new Promise((r) => setTimeout(r, baseDelayMs * 2 ** attempt));
    }
  }
  throw lastError instanceof Error ? lastError : new Error(String(lastError));
}
