// Tiny XML reader for the wire documents this client exchanges with the
// server. Handles elements, attributes, text, self-closing tags, comments
// and the five predefined entities plus numeric character references --
// which is the entire wire vocabulary. Runs identically in the browser and
// under node, so tests need no DOM.

export interface XmlNode {
  tag: string;
  attrs: Record<string, string>;
  children: XmlNode[];
  text: string;
}

const NAMED_ENTITIES: Record<string, string> = {
  amp: "&",
  lt: "<",
  gt: ">",
  quot: '"',
  apos: "'",
};

export function unescapeXml(s: string): string {
  return s.replace(/&(#x?[0-9a-fA-F]+|\w+);/g, (whole, body: string) => {
    if (body.startsWith("#x") || body.startsWith("#X")) {
      return String.fromCodePoint(parseInt(body.slice(2), 16));
    }
    if (body.startsWith("#")) {
      return String.fromCodePoint(parseInt(body.slice(1), 10));
    }
    const named = NAMED_ENTITIES[body];
    return named !== undefined ? named : whole;
  });
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/\r/g, "&#13;")
    .replace(/\n/g, "&#10;");
}

class Reader {
  pos = 0;
  constructor(readonly text: string) {}

  error(message: string): never {
    throw new Error(`XML error at ${this.pos}: ${message}`);
  }
}

export function parseXml(text: string): XmlNode {
  const r = new Reader(text.trim());
  skipProlog(r);
  const root = parseElement(r);
  skipWs(r);
  if (r.pos < r.text.length) r.error("trailing content after document element");
  return root;
}

function skipWs(r: Reader): void {
  while (r.pos < r.text.length && /\s/.test(r.text[r.pos])) r.pos++;
}

function skipProlog(r: Reader): void {
  skipWs(r);
  while (r.text.startsWith("<?", r.pos) || r.text.startsWith("<!--", r.pos)) {
    const end = r.text.startsWith("<?", r.pos)
      ? r.text.indexOf("?>", r.pos)
      : r.text.indexOf("-->", r.pos);
    if (end < 0) r.error("unterminated prolog");
    r.pos = end + (r.text.startsWith("<?", r.pos) ? 2 : 3);
    skipWs(r);
  }
}

function parseName(r: Reader): string {
  const m = /^[A-Za-z_:][\w.:-]*/.exec(r.text.slice(r.pos));
  if (!m) r.error("expected a name");
  r.pos += m[0].length;
  return m[0];
}

function parseAttrs(r: Reader): Record<string, string> {
  const attrs: Record<string, string> = {};
  for (;;) {
    skipWs(r);
    const ch = r.text[r.pos];
    if (ch === ">" || ch === "/" || ch === undefined) return attrs;
    const name = parseName(r);
    skipWs(r);
    if (r.text[r.pos] !== "=") r.error(`attribute ${name} missing '='`);
    r.pos++;
    skipWs(r);
    const quote = r.text[r.pos];
    if (quote !== '"' && quote !== "'") r.error("attribute value must be quoted");
    r.pos++;
    const end = r.text.indexOf(quote, r.pos);
    if (end < 0) r.error("unterminated attribute value");
    attrs[name] = unescapeXml(r.text.slice(r.pos, end));
    r.pos = end + 1;
  }
}

function parseElement(r: Reader): XmlNode {
  if (r.text[r.pos] !== "<") r.error("expected '<'");
  r.pos++;
  const tag = parseName(r);
  const attrs = parseAttrs(r);
  const node: XmlNode = { tag, attrs, children: [], text: "" };
  skipWs(r);
  if (r.text.startsWith("/>", r.pos)) {
    r.pos += 2;
    return node;
  }
  if (r.text[r.pos] !== ">") r.error(`malformed start tag <${tag}>`);
  r.pos++;
  for (;;) {
    if (r.pos >= r.text.length) r.error(`unclosed element <${tag}>`);
    if (r.text.startsWith("</", r.pos)) {
      r.pos += 2;
      const closing = parseName(r);
      skipWs(r);
      if (r.text[r.pos] !== ">") r.error("malformed end tag");
      r.pos++;
      if (closing !== tag) r.error(`mismatched </${closing}>, expected </${tag}>`);
      return node;
    }
    if (r.text.startsWith("<!--", r.pos)) {
      const end = r.text.indexOf("-->", r.pos);
      if (end < 0) r.error("unterminated comment");
      r.pos = end + 3;
      continue;
    }
    if (r.text[r.pos] === "<") {
      node.children.push(parseElement(r));
      continue;
    }
    const next = r.text.indexOf("<", r.pos);
    const chunk = next < 0 ? r.text.slice(r.pos) : r.text.slice(r.pos, next);
    node.text += unescapeXml(chunk);
    r.pos += chunk.length;
  }
}

export function child(node: XmlNode, tag: string): XmlNode | undefined {
  return node.children.find((c) => c.tag === tag);
}

export function childText(node: XmlNode, tag: string): string {
  const c = child(node, tag);
  return c ? c.text.trim() : "";
}

export function childrenOf(node: XmlNode, tag: string): XmlNode[] {
  return node.children.filter((c) => c.tag === tag);
}
