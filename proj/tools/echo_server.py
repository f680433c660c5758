#!/usr/bin/env python3
"""Reference echo server for the guidance bridge wire protocol.

Speaks newline-delimited JSON on stdin/stdout (--stdio) or over TCP
(--tcp PORT). Denoise requests are answered with eps_hat equal to the
received rgb payload; score requests return a constant (--score).
"""
import argparse
import json
import socket
import sys


def handle(line, score_value):
    req = json.loads(line)
    reply = {"id": req["id"]}
    if req.get("kind") == "denoise":
        reply["eps_hat"] = req["rgb"]
    elif req.get("kind") == "score":
        reply["score"] = score_value
    else:
        reply["error"] = "unknown kind"
    return json.dumps(reply)


def serve_stdio(score_value):
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        sys.stdout.write(handle(line, score_value) + "\n")
        sys.stdout.flush()


def serve_tcp(port, score_value):
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind(("127.0.0.1", port))
    srv.listen(1)
    print(f"listening on 127.0.0.1:{srv.getsockname()[1]}", file=sys.stderr)
    while True:
        conn, _ = srv.accept()
        buf = b""
        while True:
            chunk = conn.recv(65536)
            if not chunk:
                break
            buf += chunk
            while b"\n" in buf:
                line, buf = buf.split(b"\n", 1)
                if line.strip():
                    conn.sendall((handle(line.decode(), args.score) + "\n").encode())
        conn.close()


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--stdio", action="store_true", help="serve on stdin/stdout")
    parser.add_argument("--tcp", type=int, metavar="PORT", help="serve on 127.0.0.1:PORT")
    parser.add_argument("--score", type=float, default=31.3, help="constant score reply")
    args = parser.parse_args()
    if args.stdio:
        serve_stdio(args.score)
    elif args.tcp is not None:
        serve_tcp(args.tcp, args.score)
    else:
        parser.error("choose --stdio or --tcp PORT")
