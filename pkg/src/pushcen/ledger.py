"""Global accounting of node masses/numerators and in-flight shares.

The ledger is a diagnostic component with knowledge no real client has:
it tracks every node's (mass, numerator) pair and every undelivered or
buffered message share, so total-mass invariance and the broadcast-time
numerator perturbation identity can be checked at runtime. Mass removed
by buffer eviction is moved to a destroyed-mass account rather than
silently dropped; conservation is checked on live + destroyed mass
against the cumulative injected mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamVector


class LemmaCheckError(AssertionError):
    """A runtime conservation/perturbation check failed."""


@dataclass
class PerturbationSample:
    """One broadcast's measured numerator shift versus its analytic bound."""

    measured: float
    bound: float
    eps_c: float


@dataclass
class SystemLedger:
    node_mass: dict[int, float] = field(default_factory=dict)
    node_numerator: dict[int, np.ndarray] = field(default_factory=dict)
    in_flight: dict[int, tuple[float, np.ndarray]] = field(default_factory=dict)
    destroyed_mass: float = 0.0
    destroyed_numerator: np.ndarray | None = None
    injected_mass: float = 0.0
    max_mass_drift: float = 0.0
    perturbation_violations: int = 0
    broadcasts_checked: int = 0

    def register_node(self, node: int, mass: float, w: ParamVector) -> None:
        self.node_mass[node] = mass
        self.node_numerator[node] = mass * w.values.copy()
        self.injected_mass += mass
        if self.destroyed_numerator is None:
            self.destroyed_numerator = np.zeros_like(w.values)

    def set_node(self, node: int, mass: float, w: ParamVector) -> None:
        """Refresh a node's (mass, numerator) after aggregation or training."""
        self.node_mass[node] = mass
        self.node_numerator[node] = mass * w.values

    def consume(self, msg_ids: list[int]) -> None:
        """Shares absorbed by an aggregation leave the in-flight set."""
        for mid in msg_ids:
            del self.in_flight[mid]

    def destroy(self, msg_id: int) -> None:
        """A share evicted by dedup/overflow is accounted as destroyed."""
        y, x = self.in_flight.pop(msg_id)
        self.destroyed_mass += y
        self.destroyed_numerator = self.destroyed_numerator + x

    def record_broadcast(
        self,
        sender: int,
        shares: list[tuple[int, float]],
        decoded: ParamVector,
        true_model: ParamVector,
        retained_mass: float,
        tol: float = 1e-9,
    ) -> PerturbationSample:
        """Register new in-flight shares and check the perturbation identity.

        The numerator shift caused by one broadcast equals the total sent
        mass times the reconstruction error of the transmitted payload;
        its norm must not exceed (sent mass) * ||decoded - true||.
        """
        err = decoded.values - true_model.values
        eps_c = float(np.linalg.norm(err))
        sigma_total = 0.0
        for msg_id, sigma in shares:
            self.in_flight[msg_id] = (sigma, sigma * decoded.values)
            sigma_total += sigma
        self.set_node(sender, retained_mass, true_model)
        measured = float(np.linalg.norm(sigma_total * err))
        bound = sigma_total * eps_c
        self.broadcasts_checked += 1
        if measured > bound + tol:
            self.perturbation_violations += 1
            raise LemmaCheckError(
                f"numerator perturbation {measured} exceeds bound {bound} at sender {sender}"
            )
        return PerturbationSample(measured, bound, eps_c)

    # -- totals ---------------------------------------------------------

    def total_mass(self) -> float:
        return sum(self.node_mass.values()) + sum(y for y, _ in self.in_flight.values())

    def total_numerator(self) -> np.ndarray:
        x = sum(self.node_numerator.values())
        for _, xm in self.in_flight.values():
            x = x + xm
        return x

    def check_mass_conservation(self, min_mass: float = 1e-12) -> float:
        """Relative drift of live+destroyed mass versus injected mass."""
        drift = abs(self.total_mass() + self.destroyed_mass - self.injected_mass)
        rel = drift / self.injected_mass
        self.max_mass_drift = max(self.max_mass_drift, rel)
        for node, y in self.node_mass.items():
            if y < min_mass:
                raise LemmaCheckError(f"node {node} mass {y} below positivity floor")
        return rel

    def reference(self) -> tuple[np.ndarray, float]:
        """De-biased reference w_bar = X_tot/Y_tot and the consensus error.

        The totals include the destroyed accounts: eviction moves a share
        between accounts without touching the preserved average, so w_bar
        stays on the average-preserving trajectory under buffer overflow.
        """
        y_tot = self.total_mass() + self.destroyed_mass
        if y_tot <= 0:
            raise LemmaCheckError("total system mass must be positive")
        x_tot = self.total_numerator()
        if self.destroyed_numerator is not None:
            x_tot = x_tot + self.destroyed_numerator
        w_bar = x_tot / y_tot
        n = len(self.node_mass)
        e_con = 0.0
        for node, y in self.node_mass.items():
            d = self.node_numerator[node] / y - w_bar
            e_con += float(d @ d)
        return w_bar, e_con / n
