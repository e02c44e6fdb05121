"""Fetching a KG neighborhood over SPARQL, with an on-disk cache.

Real endpoints are slow and rate-limited, so the fetcher writes every
neighborhood it sees into a small TSV cache and records the entity in a
manifest; a re-run skips the network entirely.  To keep this demo
self-contained we stand up a toy HTTP server that speaks just enough of
the SPARQL JSON results format, seeded with one entity.  Point
``endpoint`` at a real service (e.g. a local Blazegraph or Virtuoso
loaded with a Wikidata dump) and the same code fetches real data.
"""

import json
import shutil
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs

from kgned.context import verbalize
from kgned.kg import TripleStore
from kgned.sparql import (LABELS_FILE, MANIFEST_FILE, TRIPLES_FILE,
                          fetch_remote)


def uri(value):
    return {"type": "uri", "value": value}


def lit(value):
    return {"type": "literal", "value": value}


WD = "http://www.wikidata.org/entity/"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
DESCRIPTION = "http://schema.org/description"

HOP1_ROWS = [
    {"relation": uri(WD + "P17"), "tail": uri(WD + "Q408")},
    {"relation": uri(DESCRIPTION), "tail": lit("highway system in Australia")},
    {"relation": uri(RDFS_LABEL), "tail": lit("National Highway")},
]
LABEL_ROWS = {
    WD + "Q1967298": [{"subject": uri(WD + "Q1967298"), "kind": lit("label"),
                       "text": lit("National Highway")}],
    WD + "P17": [{"subject": uri(WD + "P17"), "kind": lit("label"),
                  "text": lit("country")}],
    WD + "Q408": [{"subject": uri(WD + "Q408"), "kind": lit("label"),
                   "text": lit("Australia")}],
    DESCRIPTION: [{"subject": uri(DESCRIPTION), "kind": lit("label"),
                   "text": lit("description")}],
    RDFS_LABEL: [{"subject": uri(RDFS_LABEL), "kind": lit("label"),
                  "text": lit("label")}],
}


class ToyEndpoint(BaseHTTPRequestHandler):
    """Answers the hop query with HOP1_ROWS and the label query with the
    LABEL_ROWS whose IRIs appear in the VALUES clause."""

    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"])).decode()
        query = parse_qs(body)["query"][0]
        self.server.query_log.append(query.splitlines()[0])
        if "VALUES ?subject" in query:
            rows = [row for iri, seeded in LABEL_ROWS.items()
                    if f"<{iri}>" in query for row in seeded]
        else:
            rows = HOP1_ROWS
        payload = json.dumps({"head": {"vars": []},
                              "results": {"bindings": rows}}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/sparql-results+json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


server = ThreadingHTTPServer(("127.0.0.1", 0), ToyEndpoint)
server.query_log = []
threading.Thread(target=server.serve_forever, daemon=True).start()
endpoint = f"http://127.0.0.1:{server.server_address[1]}/sparql"
print(f"toy endpoint listening at {endpoint}")

cache_dir = Path(tempfile.mkdtemp(prefix="kgned-cache-"))
store = TripleStore()
result = fetch_remote(endpoint, "Q1967298", hops="1", cap=10,
                      cache_dir=cache_dir, store=store)
print(f"\nfirst fetch: from_cache={result.from_cache}, "
      f"{len(result.triples)} triples, {len(server.query_log)} queries sent")
for triple in store.neighbors("Q1967298", "1"):
    print(f"  hop {triple.hop}: {verbalize(store, triple).text}")

print("\ncache contents:")
for name in (TRIPLES_FILE, LABELS_FILE, MANIFEST_FILE):
    print(f"  {name}:")
    for line in (cache_dir / name).read_text(encoding="utf-8").splitlines():
        print(f"    {line}")

before = len(server.query_log)
again = fetch_remote(endpoint, "Q1967298", hops="1", cap=10,
                     cache_dir=cache_dir)
print(f"\nsecond fetch: from_cache={again.from_cache}, "
      f"{len(server.query_log) - before} new queries sent")

server.shutdown()
shutil.rmtree(cache_dir)
