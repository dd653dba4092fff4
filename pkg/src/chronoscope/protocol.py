"""Control protocol: newline-delimited JSON frames over plain TCP,
version `chronoscope/1`.

One controlling client at a time may issue verbs; any number of
read-only observers receive the same event stream.  Every request gets
exactly one response; events are unsolicited and preserve execution
order.  Schema in docs/protocol.md.
"""

from __future__ import annotations

import json
import selectors
import socket

from . import PROTOCOL_VERSION
from .checkpoints import MissingCheckpointError
from .personality.base import PersonalityError
from .repl import FORWARD_TOKENS, REASONS
from .search import reverse_watch


# ----------------------------------------------------------------------
# payload serializers


def stop_payload(rep, notice: str | None = None) -> dict:
    out = {
        "file": rep.location.file_label,
        "line": rep.location.line,
        "depth": rep.stack_depth,
        "bp_count": rep.bp_count,
        "reason": REASONS[rep.stop_kind],
        "work": rep.work,
    }
    if notice is not None:
        out["notice"] = notice
    return out


def checkpoint_payload(ckpt) -> dict:
    return {
        "id": ckpt.ckpt_id,
        "prefix_len": ckpt.prefix_len,
        "substep": ckpt.substep,
        "file": ckpt.state.location.file_label,
        "line": ckpt.state.location.line,
        "depth": ckpt.state.depth,
        "bp_count": ckpt.state.bp_count,
        "work": ckpt.work,
        "auto": ckpt.auto,
    }


def history_payload(history) -> dict:
    entries = []
    for e in history.entries:
        item = {"token": e.token, "repeat": e.repeat}
        if e.state_after is not None:
            item.update(
                depth=e.depth_after,
                file=e.state_after.location.file_label,
                line=e.state_after.location.line,
                bp_count=e.state_after.bp_count,
                work=e.work_after,
            )
        if e.embedded_checkpoints:
            item["embedded"] = list(e.embedded_checkpoints)
        entries.append(item)
    mutations = [
        {"position": m.position, "action": m.action, "bp_id": m.bp_id, "line": m.line}
        for m in history.mutations
    ]
    return {"entries": entries, "mutations": mutations}


def state_payload(session) -> dict:
    rep = session.report()
    state = getattr(session.personality, "state", None)
    return {
        "file": rep.location.file_label,
        "line": rep.location.line,
        "depth": rep.stack_depth,
        "bp_count": rep.bp_count,
        "work": rep.work,
        "reason": REASONS[rep.stop_kind],
        "history_len": session.history.unit_length,
        "live": bool(state.live) if state is not None else True,
        "output": list(state.output_log) if state is not None else [],
    }


# ----------------------------------------------------------------------
# server


class _Client:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.buf = b""

    def send(self, obj: dict) -> None:
        try:
            self.sock.sendall(json.dumps(obj).encode("utf-8") + b"\n")
        except OSError:
            pass


class ProtocolServer:
    def __init__(self, monitor, port: int, host: str = "127.0.0.1"):
        self.monitor = monitor
        self.session = monitor.session
        self.listener = socket.create_server((host, port))
        self.port = self.listener.getsockname()[1]
        self.sel = selectors.DefaultSelector()
        self.sel.register(self.listener, selectors.EVENT_READ, None)
        self.clients: list[_Client] = []
        self.controller: _Client | None = None
        self.running = True

    # ---- event fanout ----

    def _broadcast(self, kind: str, payload: dict) -> None:
        for client in self.clients:
            client.send({"event": kind, "payload": payload})

    def _drain_session_events(self) -> None:
        events = self.session.events
        self.session.events = []
        for kind, payload in events:
            if kind == "checkpoint":
                self._broadcast("checkpoint", checkpoint_payload(payload))
            elif kind == "history-truncated":
                self._broadcast("history-truncated", {"prefix_len": payload})
            elif kind == "stop":
                self._broadcast("stop", stop_payload(payload))
            elif kind == "watch-result":
                self._broadcast("watch-result", stop_payload(payload))

    # ---- verb dispatch ----

    def _execute(self, verb: str, args: dict) -> dict:
        session = self.session
        if verb in FORWARD_TOKENS:
            rep = session.user_command(FORWARD_TOKENS[verb])
            return stop_payload(rep)
        if verb == "break":
            bp_id = session.set_breakpoint(int(args["line"]))
            return {"bp_id": bp_id, "line": int(args["line"])}
        if verb == "delete":
            session.delete_breakpoint(int(args["bp_id"]))
            return {"bp_id": int(args["bp_id"])}
        if verb == "eval":
            return {"value": session.eval_expression(args["expr"])}
        if verb == "checkpoint":
            ckpt = session.take_checkpoint(auto=False)
            return checkpoint_payload(ckpt)
        if verb == "restore":
            rep = session.restore_checkpoint(int(args["id"]))
            return stop_payload(rep)
        if verb == "undo":
            res = session.undo_command(int(args.get("k", 1)))
            self._broadcast_stop_later = res.report
            return stop_payload(res.report, res.notice)
        if verb in ("reverse-next", "reverse-step", "reverse-continue", "reverse-finish"):
            res = getattr(session, verb.replace("-", "_"))()
            self._broadcast_stop_later = res.report
            return stop_payload(res.report, res.notice)
        if verb == "reverse-watch":
            result = reverse_watch(session, args["expr"])
            payload = stop_payload(result.report, result.notice)
            payload["counts"] = result.counts.counts()
            payload["witness_value"] = result.counts.witness_value
            payload["orig_value"] = result.counts.orig_value
            return payload
        if verb == "get-history":
            return history_payload(session.history)
        if verb == "get-checkpoints":
            return {"checkpoints": [checkpoint_payload(c) for c in session.store.all()]}
        if verb == "get-state":
            return state_payload(session)
        if verb == "get-source":
            file_label = getattr(getattr(session.personality, "program", None), "file_label", "")
            return {"file": file_label, "text": self.monitor.source_text}
        if verb == "forward":
            text = args["text"].strip()
            if text in FORWARD_TOKENS:
                rep = session.user_command(FORWARD_TOKENS[text])
                return stop_payload(rep)
            handler = getattr(session.personality, "handle_command_text", None)
            if handler is None:
                raise ValueError(f"unknown forward command: {text}")
            return {"output": handler(text)}
        if verb == "quit":
            self.running = False
            return {}
        raise ValueError(f"unknown verb: {verb}")

    def _handle_request(self, client: _Client, msg: dict) -> None:
        req_id = msg.get("id")
        if self.controller is None:
            self.controller = client
        if client is not self.controller:
            client.send({"id": req_id, "error": "busy: another client controls this session"})
            return
        verb = msg.get("verb")
        args = msg.get("args") or {}
        self._broadcast_stop_later = None
        try:
            payload = self._execute(verb, args)
        except (PersonalityError, MissingCheckpointError, ValueError, KeyError) as exc:
            self._drain_session_events()
            client.send({"id": req_id, "error": str(exc)})
            return
        self._drain_session_events()
        if self._broadcast_stop_later is not None:
            self._broadcast("stop", stop_payload(self._broadcast_stop_later))
        client.send({"id": req_id, "ok": True, "payload": payload})
        self.monitor.persist()

    # ---- socket loop ----

    def _accept(self) -> None:
        sock, _ = self.listener.accept()
        client = _Client(sock)
        self.clients.append(client)
        self.sel.register(sock, selectors.EVENT_READ, client)
        client.send(
            {
                "event": "hello",
                "payload": {
                    "version": PROTOCOL_VERSION,
                    "role": "controller" if self.controller in (None, client) else "observer",
                },
            }
        )

    def _drop(self, client: _Client) -> None:
        try:
            self.sel.unregister(client.sock)
        except (KeyError, ValueError):
            pass
        try:
            client.sock.close()
        except OSError:
            pass
        if client in self.clients:
            self.clients.remove(client)
        if client is self.controller:
            self.controller = None  # session continues; reattachable

    def _read(self, client: _Client) -> None:
        try:
            data = client.sock.recv(65536)
        except OSError:
            data = b""
        if not data:
            self._drop(client)
            return
        client.buf += data
        while b"\n" in client.buf:
            line, client.buf = client.buf.split(b"\n", 1)
            if not line.strip():
                continue
            try:
                msg = json.loads(line.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                client.send({"id": None, "error": "malformed request"})
                continue
            self._handle_request(client, msg)

    def serve_forever(self) -> None:
        try:
            while self.running:
                for key, _ in self.sel.select(timeout=0.5):
                    if key.data is None:
                        self._accept()
                    else:
                        self._read(key.data)
        finally:
            self.close()

    def close(self) -> None:
        for client in list(self.clients):
            self._drop(client)
        try:
            self.sel.unregister(self.listener)
        except (KeyError, ValueError):
            pass
        self.listener.close()
        self.sel.close()


def serve(monitor, port: int, host: str = "127.0.0.1") -> None:
    ProtocolServer(monitor, port, host).serve_forever()


# ----------------------------------------------------------------------
# client helper (used by tests and tools)


class ProtocolClient:
    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.buf = b""
        self.events: list[dict] = []
        self._next_id = 1
        hello = self._read_message()
        if hello.get("event") != "hello":
            raise ConnectionError("no hello frame")
        self.version = hello["payload"]["version"]
        self.role = hello["payload"]["role"]
        if self.version != PROTOCOL_VERSION:
            raise ConnectionError(f"protocol version mismatch: {self.version}")

    def _read_message(self) -> dict:
        while b"\n" not in self.buf:
            data = self.sock.recv(65536)
            if not data:
                raise ConnectionError("server closed connection")
            self.buf += data
        line, self.buf = self.buf.split(b"\n", 1)
        return json.loads(line.decode("utf-8"))

    def request(self, verb: str, **args):
        req_id = self._next_id
        self._next_id += 1
        self.sock.sendall(json.dumps({"id": req_id, "verb": verb, "args": args}).encode("utf-8") + b"\n")
        while True:
            msg = self._read_message()
            if "event" in msg:
                self.events.append(msg)
                continue
            if msg.get("id") != req_id:
                continue
            if "error" in msg:
                raise ProtocolRequestError(msg["error"])
            return msg["payload"]

    def poll_events(self, timeout: float = 0.2) -> list[dict]:
        self.sock.settimeout(timeout)
        try:
            while True:
                self.events.append(self._read_message())
        except (TimeoutError, socket.timeout):
            pass
        finally:
            self.sock.settimeout(None)
        return self.events

    def close(self) -> None:
        self.sock.close()


class ProtocolRequestError(Exception):
    pass
