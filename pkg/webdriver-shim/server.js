// Minimal W3C WebDriver endpoint backed by jsdom.
//
// Implements the slice of the wire protocol the fuzzer uses: session
// lifecycle with the manual-proxy capability, navigation, XPath element
// lookup, click/keys/actions, and synchronous script execution.  Every
// network request a page makes (the document, subresources loaded by
// jsdom, and window.fetch calls) is sent through the session's HTTP
// proxy in absolute-form, so pages never touch the real network.
//
// Usage: node server.js [--port N]   (N defaults to 0 = ephemeral)
// Prints "LISTENING <port>" on stdout once bound.

"use strict";

const http = require("http");
const crypto = require("crypto");
const { JSDOM, VirtualConsole, requestInterceptor } = require("jsdom");

const ELEMENT_KEY = "element-6066-11e4-a52e-4f735466cecf";
const LOAD_SETTLE_MS = 5000;

// ---------------------------------------------------------------------------
// proxy-routed HTTP

function proxyRequest(proxy, method, targetUrl, headers, body) {
  return new Promise((resolve, reject) => {
    const target = new URL(targetUrl);
    const request = http.request(
      {
        host: proxy.host,
        port: proxy.port,
        method,
        path: targetUrl, // absolute-form request line: the proxy routes it
        headers: { host: target.host, ...headers },
      },
      (response) => {
        const chunks = [];
        response.on("data", (chunk) => chunks.push(chunk));
        response.on("end", () =>
          resolve({
            status: response.statusCode,
            headers: response.headers,
            body: Buffer.concat(chunks),
          })
        );
      }
    );
    request.on("error", reject);
    if (body) request.write(body);
    request.end();
  });
}

function proxyInterceptor(proxy) {
  // answers every subresource request jsdom makes with the proxy's reply
  return requestInterceptor(async (request) => {
    const reply = await proxyRequest(proxy, request.method, request.url, {});
    return new Response(reply.body, {
      status: reply.status,
      headers: { "content-type": reply.headers["content-type"] || "text/plain" },
    });
  });
}

function describeError(err) {
  if (err instanceof Error || (err && err.name && err.message !== undefined)) {
    return `${err.name}: ${err.message}`;
  }
  return String(err);
}

function makeFetch(session) {
  // window.fetch routed through the session proxy; just enough of the
  // Response surface for a single-page app
  return function fetch(input, init) {
    const url = new URL(String(input), session.window.location.href).href;
    const method = (init && init.method) || "GET";
    const headers = (init && init.headers) || {};
    const body = init && init.body;
    return proxyRequest(session.proxy, method, url, headers, body).then(
      (reply) => ({
        ok: reply.status >= 200 && reply.status < 300,
        status: reply.status,
        statusText: http.STATUS_CODES[reply.status] || "",
        url,
        headers: {
          get: (name) => {
            const value = reply.headers[String(name).toLowerCase()];
            return value === undefined ? null : String(value);
          },
        },
        text: () => Promise.resolve(reply.body.toString("utf-8")),
        json: () => Promise.resolve(JSON.parse(reply.body.toString("utf-8"))),
        arrayBuffer: () =>
          Promise.resolve(
            reply.body.buffer.slice(
              reply.body.byteOffset,
              reply.body.byteOffset + reply.body.byteLength
            )
          ),
      })
    );
  };
}

// ---------------------------------------------------------------------------
// sessions

class Session {
  constructor(id, proxy) {
    this.id = id;
    this.proxy = proxy; // {host, port} or null
    this.dom = null;
    this.window = null;
    this.errors = [];
    this.elements = new Map(); // element ref -> DOM node
    this.nextElement = 0;
  }

  async navigate(url) {
    if (this.dom) {
      this.dom.window.close();
      this.dom = null;
    }
    let html = "<html><head></head><body></body></html>";
    if (this.proxy) {
      const reply = await proxyRequest(this.proxy, "GET", url, {});
      html = reply.body.toString("utf-8");
    }

    const virtualConsole = new VirtualConsole();
    virtualConsole.on("jsdomError", (err) => this.errors.push(describeError(err)));

    const session = this;
    this.dom = new JSDOM(html, {
      url,
      runScripts: "dangerously",
      pretendToBeVisual: true,
      resources: this.proxy
        ? { interceptors: [proxyInterceptor(this.proxy)] }
        : undefined,
      virtualConsole,
      beforeParse(window) {
        window.__pageErrors = session.errors;
        window.fetch = makeFetch(session);
        window.reportError = (err) => session.errors.push(describeError(err));
        window.addEventListener("error", (event) => {
          session.errors.push(
            event.error ? describeError(event.error) : String(event.message)
          );
        });
        session.window = window;
      },
    });
    this.window = this.dom.window;

    // let parsing, subresource scripts and the load event settle
    await new Promise((resolve) => {
      let done = false;
      const finish = () => {
        if (!done) {
          done = true;
          resolve();
        }
      };
      this.window.addEventListener("load", finish);
      if (this.window.document.readyState === "complete") finish();
      setTimeout(finish, LOAD_SETTLE_MS);
    });
  }

  refFor(node) {
    this.nextElement += 1;
    const ref = `el-${this.nextElement}`;
    this.elements.set(ref, node);
    return ref;
  }

  findAll(xpath) {
    const document = this.window.document;
    const result = document.evaluate(
      xpath,
      document,
      null,
      this.window.XPathResult.ORDERED_NODE_SNAPSHOT_TYPE,
      null
    );
    const nodes = [];
    for (let i = 0; i < result.snapshotLength; i++) {
      nodes.push(result.snapshotItem(i));
    }
    return nodes;
  }

  execute(script, args) {
    const deserialized = (args || []).map((arg) => {
      if (arg && typeof arg === "object" && ELEMENT_KEY in arg) {
        return this.elements.get(arg[ELEMENT_KEY]);
      }
      return arg;
    });
    const fn = this.window.eval(`(function () { ${script} })`);
    return fn.apply(this.window, deserialized);
  }

  close() {
    if (this.dom) {
      this.dom.window.close();
      this.dom = null;
    }
  }
}

const sessions = new Map();

// ---------------------------------------------------------------------------
// wire protocol

class WireError extends Error {
  constructor(status, code, message) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

function getSession(id) {
  const session = sessions.get(id);
  if (!session) {
    throw new WireError(404, "invalid session id", `no session ${id}`);
  }
  return session;
}

function getElement(session, ref) {
  const node = session.elements.get(ref);
  if (!node) {
    throw new WireError(404, "stale element reference", `no element ${ref}`);
  }
  return node;
}

function parseProxy(capabilities) {
  const always = (capabilities && capabilities.alwaysMatch) || {};
  const proxy = always.proxy;
  if (!proxy || proxy.proxyType !== "manual" || !proxy.httpProxy) return null;
  const [host, port] = proxy.httpProxy.split(":");
  return { host, port: Number(port) };
}

async function handleCommand(method, parts, payload) {
  // POST /session
  if (method === "POST" && parts.length === 1 && parts[0] === "session") {
    const id = crypto.randomUUID();
    const proxy = parseProxy(payload && payload.capabilities);
    sessions.set(id, new Session(id, proxy));
    return { sessionId: id, capabilities: { browserName: "jsdom" } };
  }

  if (parts[0] !== "session" || parts.length < 2) {
    throw new WireError(404, "unknown command", `no route for ${parts.join("/")}`);
  }
  const session = getSession(parts[1]);
  const rest = parts.slice(2);

  // DELETE /session/:id
  if (method === "DELETE" && rest.length === 0) {
    session.close();
    sessions.delete(session.id);
    return null;
  }

  // POST /session/:id/url
  if (method === "POST" && rest.length === 1 && rest[0] === "url") {
    await session.navigate(payload.url);
    return null;
  }

  // POST /session/:id/element and /elements
  if (method === "POST" && rest.length === 1 && rest[0] === "element") {
    const nodes = session.findAll(payload.value);
    if (nodes.length === 0) {
      throw new WireError(404, "no such element", payload.value);
    }
    return { [ELEMENT_KEY]: session.refFor(nodes[0]) };
  }
  if (method === "POST" && rest.length === 1 && rest[0] === "elements") {
    return session
      .findAll(payload.value)
      .map((node) => ({ [ELEMENT_KEY]: session.refFor(node) }));
  }

  // POST /session/:id/element/:ref/click | /value
  if (method === "POST" && rest.length === 3 && rest[0] === "element") {
    const node = getElement(session, rest[1]);
    if (rest[2] === "click") {
      node.click();
      return null;
    }
    if (rest[2] === "value") {
      node.value = (node.value || "") + payload.text;
      node.dispatchEvent(new session.window.Event("input", { bubbles: true }));
      node.dispatchEvent(new session.window.Event("change", { bubbles: true }));
      return null;
    }
  }

  // POST /session/:id/execute/sync
  if (
    method === "POST" &&
    rest.length === 2 &&
    rest[0] === "execute" &&
    rest[1] === "sync"
  ) {
    try {
      const value = session.execute(payload.script, payload.args);
      return value === undefined ? null : value;
    } catch (err) {
      throw new WireError(500, "javascript error", describeError(err));
    }
  }

  // POST /session/:id/actions: pointer moves and wheel scrolls
  if (method === "POST" && rest.length === 1 && rest[0] === "actions") {
    for (const track of payload.actions || []) {
      for (const step of track.actions || []) {
        if (step.type === "pointerMove" && step.origin && step.origin[ELEMENT_KEY]) {
          const node = getElement(session, step.origin[ELEMENT_KEY]);
          node.dispatchEvent(
            new session.window.Event("mouseover", { bubbles: true })
          );
        } else if (step.type === "scroll") {
          session.window.dispatchEvent(new session.window.Event("scroll"));
        }
      }
    }
    return null;
  }

  throw new WireError(
    404,
    "unknown command",
    `no route for ${method} ${parts.join("/")}`
  );
}

// ---------------------------------------------------------------------------
// HTTP server

function readBody(request) {
  return new Promise((resolve, reject) => {
    const chunks = [];
    request.on("data", (chunk) => chunks.push(chunk));
    request.on("end", () => resolve(Buffer.concat(chunks)));
    request.on("error", reject);
  });
}

const server = http.createServer(async (request, response) => {
  const parts = request.url.split("?")[0].split("/").filter(Boolean);
  let status = 200;
  let body;
  try {
    const raw = await readBody(request);
    const payload = raw.length ? JSON.parse(raw.toString("utf-8")) : null;
    body = { value: await handleCommand(request.method, parts, payload) };
  } catch (err) {
    if (err instanceof WireError) {
      status = err.status;
      body = { value: { error: err.code, message: err.message } };
    } else {
      status = 500;
      body = { value: { error: "unknown error", message: describeError(err) } };
    }
  }
  const text = JSON.stringify(body);
  response.writeHead(status, {
    "Content-Type": "application/json; charset=utf-8",
    "Content-Length": Buffer.byteLength(text),
  });
  response.end(text);
});

const portArg = process.argv.indexOf("--port");
const port = portArg === -1 ? 0 : Number(process.argv[portArg + 1]);

server.listen(port, "127.0.0.1", () => {
  console.log(`LISTENING ${server.address().port}`);
});

process.on("SIGTERM", () => process.exit(0));
process.on("SIGINT", () => process.exit(0));
