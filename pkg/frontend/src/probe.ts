/**
 * Minimal control-plane peer: announces itself over the broker, answers
 * node-information requests with one device entity exposing a single
 * operation ("echo"), and serves commands for it. Everything runs on the
 * node event loop; no worker threads are needed at probe scale.
 */
import * as net from "node:net";
import { randomUUID } from "node:crypto";

import { Json } from "./canon";
import { Envelope, makeEnvelope, encodeEnvelope, decodeEnvelope } from "./envelope";
import { FrameReader, packFrames } from "./framing";

const HELLO_TOPIC = "sys/hello";
const NODEINFO_REQ_TOPIC = "sys/nodeinfo-req";
const NODEINFO_RESP_TOPIC = "sys/nodeinfo-resp";
const COMMAND_EVENT = "sys/CommandEvent";
const RESPONSE_EVENT = "sys/ResponseEvent";
const SUB_TOPIC = Buffer.from("+sub");

export interface ProbeConfig {
  frontend: string; // tcp://host:port the probe publishes to
  backend: string; // tcp://host:port the probe subscribes on
  uuid?: string;
  name?: string;
  helloIntervalMs?: number;
}

function parseEndpoint(uri: string): { host: string; port: number } {
  const m = /^tcp:\/\/([^:/]+):(\d+)$/.exec(uri);
  if (!m) {
    throw new Error(`invalid tcp endpoint ${uri} (expected tcp://HOST:PORT)`);
  }
  return { host: m[1], port: parseInt(m[2], 10) };
}

export class Probe {
  readonly uuid: string;
  readonly deviceUuid: string;
  readonly name: string;
  private readonly helloIntervalMs: number;
  private pub: net.Socket | null = null;
  private sub: net.Socket | null = null;
  private helloTimer: NodeJS.Timeout | null = null;
  private readonly frontend: { host: string; port: number };
  private readonly backend: { host: string; port: number };

  constructor(config: ProbeConfig) {
    this.uuid = config.uuid ?? randomUUID();
    this.deviceUuid = randomUUID();
    this.name = config.name ?? "probe";
    this.helloIntervalMs = config.helloIntervalMs ?? 500;
    this.frontend = parseEndpoint(config.frontend);
    this.backend = parseEndpoint(config.backend);
  }

  async start(): Promise<void> {
    this.pub = await this.connect(this.frontend);
    this.sub = await this.connect(this.backend);
    const reader = new FrameReader();
    this.sub.on("data", (chunk) => {
      for (const frames of reader.push(chunk)) {
        this.onMessage(frames);
      }
    });
    for (const prefix of ["sys/", `node/${this.uuid}`, `ent/${this.uuid}`, `ent/${this.deviceUuid}`]) {
      this.sub.write(packFrames(SUB_TOPIC, Buffer.from("{}"), Buffer.from(prefix, "utf-8")));
    }
    this.sendHello();
    this.helloTimer = setInterval(() => this.sendHello(), this.helloIntervalMs);
  }

  stop(): void {
    if (this.helloTimer !== null) {
      clearInterval(this.helloTimer);
      this.helloTimer = null;
    }
    for (const sock of [this.pub, this.sub]) {
      sock?.destroy();
    }
    this.pub = this.sub = null;
  }

  private connect(endpoint: { host: string; port: number }): Promise<net.Socket> {
    return new Promise((resolve, reject) => {
      const sock = net.createConnection(endpoint, () => {
        sock.setNoDelay(true);
        sock.removeListener("error", reject);
        resolve(sock);
      });
      sock.once("error", reject);
    });
  }

  private publish(env: Envelope): void {
    const [topic, header, payload] = encodeEnvelope(env);
    this.pub?.write(packFrames(topic, header, payload));
  }

  private sendHello(): void {
    this.publish(
      makeEnvelope(HELLO_TOPIC, "Hello", { uuid: this.uuid, config_hash: "" }, this.uuid, this.uuid)
    );
  }

  private descriptor(): Record<string, Json> {
    return {
      uuid: this.uuid,
      name: this.name,
      info: "cross-language probe",
      entities: [
        {
          uuid: this.deviceUuid,
          kind: "device",
          name: "echo0",
          device_name: "probe0",
          operations: ["echo"],
        },
      ],
      local: false,
    };
  }

  private onMessage(frames: [Buffer, Buffer, Buffer]): void {
    let env: Envelope;
    try {
      env = decodeEnvelope(frames);
    } catch {
      return; // undecodable traffic is not ours to crash on
    }
    if (env.header.src_node === this.uuid) {
      return; // own broadcast echoed back
    }
    if (env.topic === NODEINFO_REQ_TOPIC) {
      this.onNodeinfoRequest(env);
      return;
    }
    if (env.header.event_type === COMMAND_EVENT) {
      this.onCommand(env);
    }
  }

  private onNodeinfoRequest(env: Envelope): void {
    let doc: { target?: string; requester?: string };
    try {
      doc = JSON.parse(env.payload.toString("utf-8"));
    } catch {
      return;
    }
    if (doc.target !== this.uuid || typeof doc.requester !== "string") {
      return;
    }
    const response = this.descriptor();
    response.target = doc.requester;
    response.config_hash = "";
    this.publish(
      makeEnvelope(NODEINFO_RESP_TOPIC, "NodeInformationResponse", response, this.uuid, this.uuid)
    );
  }

  private onCommand(env: Envelope): void {
    let ctx: { operation?: string; args?: Json[]; correlation_id?: string; target_entity?: string };
    try {
      ctx = JSON.parse(env.payload.toString("utf-8"));
    } catch {
      return;
    }
    if (typeof ctx.correlation_id !== "string" || typeof ctx.operation !== "string") {
      return;
    }
    let response: Record<string, Json>;
    if (ctx.target_entity !== this.deviceUuid) {
      response = errorResponse(ctx.correlation_id, "EntityUnknown", `no entity ${ctx.target_entity}`);
    } else if (ctx.operation === "echo") {
      const args = Array.isArray(ctx.args) ? ctx.args : [];
      response = {
        correlation_id: ctx.correlation_id,
        status: "ok",
        value: args.length > 0 ? args[0] : null,
        error: null,
      };
    } else {
      response = errorResponse(
        ctx.correlation_id,
        "UnsupportedOperation",
        `no operation '${ctx.operation}'`
      );
    }
    this.publish(
      makeEnvelope(
        `ent/${env.header.src_entity}`,
        RESPONSE_EVENT,
        response,
        this.uuid,
        this.deviceUuid
      )
    );
  }
}

function errorResponse(correlationId: string, errorClass: string, message: string): Record<string, Json> {
  return {
    correlation_id: correlationId,
    status: "error",
    value: null,
    error: { class: errorClass, message, diagnostic: "" },
  };
}
