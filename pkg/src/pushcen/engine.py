"""Deterministic event-driven simulator.

One global pseudo-time heap drives four event kinds: client joins,
message deliveries, client activations, and evaluation ticks. Ties break
by (time, kind rank, sequence number), so a run is a pure function of
config + seed. An activation drains the buffer, aggregates, trains,
splits mass, and broadcasts to sampled out-neighbors; payload bytes go
through the real wire format once per broadcast.
"""

from __future__ import annotations

import dataclasses
import heapq
import io
from dataclasses import dataclass, field

import numpy as np

from . import codec, wire
from .buffer import BufferEntry, MessageBuffer
from .config import ExperimentConfig
from .data import ClientShard, generate, local_eval
from .ledger import LemmaCheckError, SystemLedger
from .objectives import init_params, make_objective
from .params import ParamVector, PruneMask
from .pushsum import DecodedMessage, PushSumState, aggregate, split_mass
from .trainer import local_update
from .codec import CentroidTable

# heap tie-break ranks: deliveries land before the activation that reads them
KIND_JOIN, KIND_DELIVERY, KIND_ACTIVATION, KIND_EVAL = 0, 1, 2, 3

CSV_COLUMNS = (
    "time", "mean_acc", "mean_loss", "e_con", "y_tot_drift",
    "destroyed_mass", "cum_bytes", "max_staleness",
)


@dataclass
class Broadcast:
    """Shared content of one push: every receiver decodes the same bytes."""

    sender: int
    gen_event: int
    sigma: float
    payload: object  # decoded payload handed to receivers
    table: CentroidTable | None
    w_hat: ParamVector
    nbytes: int


@dataclass
class Client:
    cid: int
    online: bool
    state: PushSumState
    shard: ClientShard
    buffer: MessageBuffer
    rate: float
    activations: int = 0
    best_acc: float = 0.0


@dataclass
class RunResult:
    rows: list[dict]
    final_client_acc: dict[int, float]
    best_client_acc: dict[int, float]
    delayed_clients: list[int]
    staleness: list[int]
    cum_bytes: int
    n_pushes: int
    ledger: SystemLedger | None
    manifest: dict
    consensus_trace: list[tuple[int, float, float]]  # (activation idx, e_con, wbar drift)

    @property
    def per_push_bytes(self) -> float:
        return self.cum_bytes / self.n_pushes if self.n_pushes else 0.0

    def metrics_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            out.write(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                               for c in CSV_COLUMNS) + "\n")
        return out.getvalue()


class Topology:
    def __init__(self, cfg: ExperimentConfig, n: int, rng: np.random.Generator):
        self.kind = cfg.topology.kind
        self.fanout = cfg.topology.fanout
        self.n = n
        self.out_edges: list[list[int]] | None = None
        if self.kind == "ring":
            self.out_edges = [[(i + 1) % n] for i in range(n)]
        elif self.kind == "fixed-directed":
            edges = {(i, (i + 1) % n) for i in range(n)}
            while len(edges) < n + cfg.topology.chords:
                a, b = rng.integers(0, n, size=2)
                if a != b:
                    edges.add((int(a), int(b)))
            self.out_edges = [[] for _ in range(n)]
            for a, b in sorted(edges):
                self.out_edges[a].append(b)
            if not self._strongly_connected():
                raise ValueError("fixed-directed topology is not strongly connected")

    def _reachable(self, edges: list[list[int]]) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            for nxt in edges[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == self.n

    def _strongly_connected(self) -> bool:
        rev = [[] for _ in range(self.n)]
        for a, nbrs in enumerate(self.out_edges):
            for b in nbrs:
                rev[b].append(a)
        return self._reachable(self.out_edges) and self._reachable(rev)

    def sample_out_neighbors(self, client: int, online: list[int],
                             rng: np.random.Generator) -> list[int]:
        if self.out_edges is not None:
            return [j for j in self.out_edges[client] if j in online]
        candidates = [j for j in online if j != client]
        k = min(self.fanout, len(candidates))
        if k == 0:
            return []
        picked = rng.choice(len(candidates), size=k, replace=False)
        return [candidates[int(i)] for i in picked]


def _horizon(cfg: ExperimentConfig, n: int) -> float:
    """Pseudo-time horizon from the event budget.

    Under the poisson schedule ``events`` counts all events (one
    activation plus its fanout deliveries per push); under round-robin it
    counts activations directly.
    """
    if cfg.schedule.kind == "round-robin":
        return cfg.schedule.events / (n * cfg.schedule.base_rate)
    per_activation = 1 + (cfg.topology.fanout if cfg.topology.kind == "random-gossip"
                          else max(cfg.topology.fanout, 1))
    if cfg.topology.fanout == 0:
        per_activation = 1
    return cfg.schedule.events / (per_activation * n * cfg.schedule.base_rate)


class Simulation:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg.resolve()
        self.cfg.data = dataclasses.replace(self.cfg.data, seed=self.cfg.seed)

    # rng streams are tagged so each consumer is independent of the others
    def _rng(self, *tags: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.cfg.seed, *tags]))

    def run(self) -> RunResult:
        cfg = self.cfg
        n = cfg.data.n_clients
        objective = make_objective(cfg.model, cfg.data.n_features,
                                   cfg.data.n_classes, cfg.hidden)
        layout = objective.layout
        shards = generate(cfg.data)
        sched_rng = self._rng(0x5C)
        topo = Topology(cfg, n, self._rng(0x70))
        t_end = _horizon(cfg, n)

        lo, hi = cfg.schedule.rate_spread
        rates = cfg.schedule.base_rate * np.exp(
            sched_rng.uniform(np.log(lo), np.log(hi), size=n)
        )
        delay_mean = cfg.schedule.delay_mean_fraction / cfg.schedule.base_rate

        n_delayed = int(round(cfg.schedule.delayed_fraction * n))
        delayed = sorted(int(i) for i in
                         sched_rng.choice(n, size=n_delayed, replace=False))
        join_times = {c: float(sched_rng.uniform(0.0, t_end / 2)) for c in delayed}

        clients: list[Client] = []
        for i in range(n):
            w = ParamVector(layout, init_params(objective, self._rng(0x1D, i)))
            state = PushSumState(
                mass=1.0, w=w,
                table=CentroidTable.zeros(layout, cfg.trainer.k),
                mask=PruneMask.all_true(layout),
            )
            clients.append(Client(
                cid=i, online=i not in join_times, state=state, shard=shards[i],
                buffer=MessageBuffer(cfg.buffer_limit, cfg.buffer_dedup),
                rate=float(rates[i]),
            ))

        use_ledger = cfg.method == "pushcen"
        ledger = SystemLedger() if use_ledger else None
        wbar0: np.ndarray | None = None
        if use_ledger:
            for c in clients:
                if c.online:
                    ledger.register_node(c.cid, c.state.mass, c.state.w)
            if cfg.record_consensus:
                wbar0 = ledger.reference()[0].copy()

        heap: list[tuple] = []
        seq = 0

        def push(time, kind, data):
            nonlocal seq
            heapq.heappush(heap, (time, kind, seq, data))
            seq += 1

        for c in clients:
            if c.online:
                first = float(sched_rng.exponential(1.0 / c.rate)) \
                    if cfg.schedule.kind == "poisson" else 0.0
                if cfg.schedule.kind == "poisson" and first <= t_end:
                    push(first, KIND_ACTIVATION, c.cid)
        if cfg.schedule.kind == "round-robin":
            dt = 1.0 / (n * cfg.schedule.base_rate)
            k = 0
            t = dt
            while t <= t_end:
                push(t, KIND_ACTIVATION, k % n)
                k += 1
                t = (k + 1) * dt
        for c in delayed:
            push(join_times[c], KIND_JOIN, c)
        for k in range(1, cfg.schedule.eval_intervals + 1):
            push(k * t_end / cfg.schedule.eval_intervals, KIND_EVAL, k)

        global_event = 0
        cum_bytes = 0
        n_pushes = 0
        staleness: list[int] = []
        rows: list[dict] = []
        consensus_trace: list[tuple[int, float, float]] = []
        activation_idx = 0

        def eval_row(time: float):
            accs, losses = {}, {}
            for c in clients:
                if c.online:
                    loss, acc = local_eval(objective, c.state.w.values, c.shard)
                    losses[c.cid], accs[c.cid] = loss, acc
                    c.best_acc = max(c.best_acc, acc)
            if use_ledger:
                _, e_con = ledger.reference()
                # dedup eviction makes live mass decay, so the positivity
                # floor only guards against genuine underflow
                y_drift = ledger.check_mass_conservation(min_mass=1e-200)
                destroyed = ledger.destroyed_mass
            else:
                ws = np.array([c.state.w.values for c in clients if c.online])
                mean = ws.mean(axis=0)
                e_con = float(np.mean(np.sum((ws - mean) ** 2, axis=1)))
                y_drift, destroyed = 0.0, 0.0
            rows.append({
                "time": time,
                "mean_acc": float(np.mean(list(accs.values()))) if accs else 0.0,
                "mean_loss": float(np.mean(list(losses.values()))) if losses else 0.0,
                "e_con": e_con,
                "y_tot_drift": y_drift,
                "destroyed_mass": destroyed,
                "cum_bytes": cum_bytes,
                "max_staleness": max(staleness) if staleness else 0,
            })
            return accs

        final_accs: dict[int, float] = {}
        while heap:
            time, kind, _, data = heapq.heappop(heap)
            if kind == KIND_EVAL:
                final_accs = eval_row(time)
                continue
            global_event += 1
            if kind == KIND_JOIN:
                c = clients[data]
                c.online = True
                if use_ledger:
                    ledger.register_node(c.cid, c.state.mass, c.state.w)
                nxt = time + float(sched_rng.exponential(1.0 / c.rate))
                if cfg.schedule.kind == "poisson" and nxt <= t_end:
                    push(nxt, KIND_ACTIVATION, c.cid)
                continue
            if kind == KIND_DELIVERY:
                bc, dest = data
                c = clients[dest]
                entry = BufferEntry(
                    payload=(bc.w_hat, bc.table), sigma=bc.sigma, sender=bc.sender,
                    gen_event=bc.gen_event, arrival_event=global_event,
                    msg_id=bc.gen_event * 1_000_000 + dest,
                )
                evicted = c.buffer.insert(entry)
                if use_ledger:
                    for e in evicted:
                        ledger.destroy(e.msg_id)
                continue

            # activation
            c = clients[data]
            if not c.online:
                continue
            activation_idx += 1
            st = c.state

            entries = c.buffer.drain()
            if entries:
                msgs = []
                for e in entries:
                    w_hat, table = e.payload
                    msgs.append(DecodedMessage(w_hat, table, e.sigma, e.sender, e.gen_event))
                    s = global_event - e.gen_event
                    if (cfg.schedule.staleness_cap is not None
                            and s > cfg.schedule.staleness_cap):
                        raise LemmaCheckError(
                            f"staleness {s} exceeds cap {cfg.schedule.staleness_cap}")
                    staleness.append(s)
                if cfg.method == "async-dfedavg":
                    ws = [st.w.values] + [m.w_hat.values for m in msgs]
                    st.w = ParamVector(layout, np.mean(ws, axis=0))
                else:
                    aggregate(st, msgs)
                if use_ledger:
                    ledger.consume([e.msg_id for e in entries])
                    ledger.set_node(c.cid, st.mass, st.w)

            if cfg.train:
                trng = self._rng(0x7A, c.cid, c.activations)
                result = local_update(
                    st, c.shard.train_x, c.shard.train_y, objective, cfg.trainer,
                    trng, encode_seed=(cfg.seed * 1_000_003 + c.cid) * 4096 + c.activations,
                )
                payload = result.payload
                if use_ledger:
                    ledger.set_node(c.cid, st.mass, st.w)
            elif cfg.compress:
                payload, st.mask, _ = codec.wcp_encode(
                    st.w, cfg.trainer.k, init=st.table, t_max=cfg.trainer.t_max,
                    seed=(cfg.seed * 1_000_003 + c.cid) * 4096 + c.activations,
                    value_bits=cfg.trainer.value_bits, overwrite=True,
                )
                if use_ledger:
                    ledger.set_node(c.cid, st.mass, st.w)
            else:
                payload = None
            c.activations += 1

            online_ids = [x.cid for x in clients if x.online]
            arng = self._rng(0xA0, global_event)
            neighbors = topo.sample_out_neighbors(c.cid, online_ids, arng)
            if neighbors:
                # only push-sum splits mass; baselines carry a dummy share
                sigma = split_mass(st, len(neighbors)) if use_ledger else 1.0
                if cfg.compress:
                    data_bytes = wire.serialize(
                        payload, sigma, c.cid, global_event, layout,
                        cfg.trainer.value_bits,
                    )
                    wmsg = wire.deserialize(data_bytes, layout)
                    w_hat = codec.wcp_decode(wmsg.payload, layout)
                    table = wmsg.payload.tables
                else:
                    data_bytes = wire.serialize_raw(
                        st.w, sigma, c.cid, global_event, cfg.raw_value_bits)
                    wmsg = wire.deserialize_raw(data_bytes, layout)
                    w_hat = wmsg.payload
                    table = None
                bc = Broadcast(c.cid, global_event, sigma, payload, table,
                               w_hat, len(data_bytes))
                shares = []
                for dest in neighbors:
                    delay = float(sched_rng.exponential(delay_mean)) \
                        if delay_mean > 0 else 0.0
                    push(time + delay, KIND_DELIVERY, (bc, dest))
                    shares.append((global_event * 1_000_000 + dest, sigma))
                cum_bytes += len(data_bytes) * len(neighbors)
                n_pushes += 1
                if use_ledger:
                    ledger.record_broadcast(c.cid, shares, w_hat, st.w, st.mass)

            if use_ledger:
                ledger.check_mass_conservation(min_mass=1e-200)
                if cfg.record_consensus:
                    wbar, e_con = ledger.reference()
                    drift = float(np.linalg.norm(wbar - wbar0)
                                  / max(np.linalg.norm(wbar0), 1e-300))
                    consensus_trace.append((activation_idx, e_con, drift))

            if cfg.schedule.kind == "poisson":
                nxt = time + float(sched_rng.exponential(1.0 / c.rate))
                if nxt <= t_end:
                    push(nxt, KIND_ACTIVATION, c.cid)

        manifest = {
            "config": cfg.to_dict(),
            "config_hash": cfg.config_hash(),
            "horizon": t_end,
            "total_events": global_event,
            "activations": activation_idx,
            "pushes": n_pushes,
            "kernel_backend": _backend_name(),
        }
        return RunResult(
            rows=rows,
            final_client_acc=final_accs,
            best_client_acc={c.cid: c.best_acc for c in clients},
            delayed_clients=delayed,
            staleness=staleness,
            cum_bytes=cum_bytes,
            n_pushes=n_pushes,
            ledger=ledger,
            manifest=manifest,
            consensus_trace=consensus_trace,
        )


def _backend_name() -> str:
    from .clustering import BACKEND
    return BACKEND


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    return Simulation(cfg).run()


def staleness_report(result: RunResult) -> dict:
    if not result.staleness:
        return {"max": 0, "mean": 0.0, "histogram": {}}
    arr = np.asarray(result.staleness)
    values, counts = np.unique(arr, return_counts=True)
    return {
        "max": int(arr.max()),
        "mean": float(arr.mean()),
        "histogram": {int(v): int(c) for v, c in zip(values, counts)},
    }
