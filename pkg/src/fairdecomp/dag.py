"""Credit decision DAG: node roles, edge constraints, assumption reporting.

The graph is configuration, not inference: it records which identification
assumptions are structurally encoded by the declared edges and which are
merely asserted. No structure learning happens here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import CyclicGraph, MissingRequiredEdge, RoleViolation

NODE_ROLES = ("covariate", "treatment", "mediator", "outcome", "unmeasured")


@dataclass(frozen=True)
class CreditDag:
    nodes: tuple[tuple[str, str], ...]
    edges: tuple[tuple[str, str], ...]
    required_edges: tuple[tuple[str, str], ...] = ()
    forbidden_edges: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple((str(n), str(r)) for n, r in self.nodes))
        object.__setattr__(self, "edges", tuple((str(u), str(v)) for u, v in self.edges))
        object.__setattr__(
            self, "required_edges", tuple((str(u), str(v)) for u, v in self.required_edges)
        )
        object.__setattr__(
            self, "forbidden_edges", tuple((str(u), str(v)) for u, v in self.forbidden_edges)
        )

    @property
    def roles(self) -> dict[str, str]:
        return dict(self.nodes)

    def nodes_with_role(self, role: str) -> tuple[str, ...]:
        return tuple(n for n, r in self.nodes if r == role)

    def to_dict(self) -> dict:
        return {
            "nodes": [{"name": n, "role": r} for n, r in self.nodes],
            "edges": [list(e) for e in self.edges],
            "required_edges": [list(e) for e in self.required_edges],
            "forbidden_edges": [list(e) for e in self.forbidden_edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "CreditDag":
        return cls(
            nodes=tuple((d["name"], d["role"]) for d in obj["nodes"]),
            edges=tuple((u, v) for u, v in obj["edges"]),
            required_edges=tuple((u, v) for u, v in obj.get("required_edges", [])),
            forbidden_edges=tuple((u, v) for u, v in obj.get("forbidden_edges", [])),
        )

    @classmethod
    def from_json(cls, text: str) -> "CreditDag":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "CreditDag":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class AssumptionReport:
    """Which identification assumptions the declared graph encodes.

    The sequential-ignorability mediator condition is violated exactly when
    some unmeasured node points into both a mediator and the outcome. The
    weaker mediator/outcome-vs-treatment conditions cannot be verified from
    data; they are reported as asserted given the declared graph, and
    flagged implausible only if an unmeasured node points into the
    treatment. The positivity check is deferred to dataset validation.
    """

    si2_violated: bool
    si2_witness: tuple[tuple[str, str], tuple[str, str]] | None
    msi1_plausible: bool
    msi2_plausible: bool
    positivity_checked: bool = False

    def to_dict(self) -> dict:
        return {
            "si2_violated": self.si2_violated,
            "si2_witness": [list(e) for e in self.si2_witness] if self.si2_witness else None,
            "msi1_plausible": self.msi1_plausible,
            "msi2_plausible": self.msi2_plausible,
            "msi_status": "asserted given the declared DAG",
            "positivity_checked": self.positivity_checked,
        }


def has_cycle(node_names: list[str], edges: list[tuple[str, str]]) -> bool:
    """Directed-cycle detection by iterative DFS coloring."""
    adjacency: dict[str, list[str]] = {n: [] for n in node_names}
    for u, v in edges:
        adjacency[u].append(v)
    color = {n: 0 for n in node_names}  # 0 unseen, 1 on stack, 2 done
    for start in node_names:
        if color[start] != 0:
            continue
        stack = [(start, iter(adjacency[start]))]
        color[start] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == 1:
                    return True
                if color[nxt] == 0:
                    color[nxt] = 1
                    stack.append((nxt, iter(adjacency[nxt])))
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                stack.pop()
    return False


def validate_dag(dag: CreditDag) -> AssumptionReport:
    """Check all structural invariants and derive the assumption report."""
    roles = {}
    for name, role in dag.nodes:
        if role not in NODE_ROLES:
            raise RoleViolation(f"node {name!r} has unknown role {role!r}")
        if name in roles:
            raise RoleViolation(f"duplicate node name {name!r}")
        roles[name] = role

    for u, v in dag.edges:
        if u not in roles or v not in roles:
            raise RoleViolation(f"edge ({u!r}, {v!r}) references an undeclared node")
        if u == v:
            raise CyclicGraph(f"self-loop at {u!r}")

    treatments = dag.nodes_with_role("treatment")
    outcomes = dag.nodes_with_role("outcome")
    if len(treatments) != 1:
        raise RoleViolation(f"expected exactly one treatment node, found {len(treatments)}")
    if len(outcomes) != 1:
        raise RoleViolation(f"expected exactly one outcome node, found {len(outcomes)}")
    treatment, outcome = treatments[0], outcomes[0]

    for u, v in dag.edges:
        if roles[u] == "outcome":
            raise RoleViolation(f"edge out of outcome node: ({u}, {v})")
        if roles[v] == "unmeasured" and roles[u] != "unmeasured":
            raise RoleViolation(f"measured node {u!r} points into unmeasured node {v!r}")

    edge_set = set(dag.edges)
    for e in dag.required_edges:
        if e not in edge_set:
            raise MissingRequiredEdge(f"required edge {e} is absent")
    for e in dag.forbidden_edges:
        if e in edge_set:
            raise RoleViolation(f"forbidden edge {e} is present")

    if has_cycle([n for n, _ in dag.nodes], list(dag.edges)):
        raise CyclicGraph("declared graph contains a directed cycle")

    # Existential check: some unmeasured node with edges into both a
    # mediator and the outcome.
    witness = None
    for u_node in dag.nodes_with_role("unmeasured"):
        to_mediators = [(u_node, v) for uu, v in dag.edges if uu == u_node and roles[v] == "mediator"]
        to_outcome = (u_node, outcome) in edge_set
        if to_mediators and to_outcome:
            witness = (to_mediators[0], (u_node, outcome))
            break
    unmeasured_into_a = any(
        roles[u] == "unmeasured" and v == treatment for u, v in dag.edges
    )
    return AssumptionReport(
        si2_violated=witness is not None,
        si2_witness=witness,
        msi1_plausible=not unmeasured_into_a,
        msi2_plausible=not unmeasured_into_a,
    )


def default_credit_dag() -> CreditDag:
    """The mortgage-audit graph: two tract covariates, four financial
    mediators, one unmeasured structural-disadvantage node."""
    covariates = ("tract_income_pct", "tract_minority_pct")
    mediators = ("dti", "ltv", "income_quintile", "credit_score_quintile")
    treatment, outcome, unmeasured = "race", "denial", "structural_disadvantage"
    nodes = (
        [(c, "covariate") for c in covariates]
        + [(treatment, "treatment")]
        + [(m, "mediator") for m in mediators]
        + [(outcome, "outcome"), (unmeasured, "unmeasured")]
    )
    edges = []
    for c in covariates:
        edges.append((c, treatment))
        edges.extend((c, m) for m in mediators)
        edges.append((c, outcome))
    edges.extend((treatment, m) for m in mediators)
    edges.append((treatment, outcome))
    edges.extend((m, outcome) for m in mediators)
    edges.extend((unmeasured, m) for m in mediators)
    edges.append((unmeasured, outcome))
    required = (("dti", outcome), ("credit_score_quintile", outcome))
    forbidden = tuple((outcome, v) for v in (treatment,) + mediators)
    return CreditDag(
        nodes=tuple(nodes),
        edges=tuple(edges),
        required_edges=required,
        forbidden_edges=forbidden,
    )


def generic_dag(w_names, m_names, include_unmeasured: bool = True) -> CreditDag:
    """A graph with the standard edge pattern over arbitrary column names."""
    nodes = (
        [(w, "covariate") for w in w_names]
        + [("a", "treatment")]
        + [(m, "mediator") for m in m_names]
        + [("y", "outcome")]
    )
    edges = []
    for w in w_names:
        edges.append((w, "a"))
        edges.extend((w, m) for m in m_names)
        edges.append((w, "y"))
    edges.extend(("a", m) for m in m_names)
    edges.append(("a", "y"))
    edges.extend((m, "y") for m in m_names)
    if include_unmeasured:
        nodes.append(("u", "unmeasured"))
        edges.extend(("u", m) for m in m_names)
        edges.append(("u", "y"))
    return CreditDag(nodes=tuple(nodes), edges=tuple(edges))
