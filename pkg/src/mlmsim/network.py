"""Netlist representation and an exact DC solver for resistive networks.

Networks are small (tens of nodes), so the solver is plain dense nodal
analysis with voltage sources handled as extra current unknowns and solved
by direct factorization. Memristor elements are placeholders whose
resistance is supplied per solve, which lets the transient controller
restamp only the device conductances on every timestep.

The multi-level cell builder produces one sub-cell per memristor:

    write source --[r_write]-- P_i (+) --[device]-- N_i (-) --[r_series]-- M
                                                            M --[r_ground]-- gnd

with a switchable reset source on every device negative terminal and a
switchable read source on every programming terminal P_i. Putting the read
rail on the P side forces the read current through the devices, so the
probe voltage across r_ground is the divider of the parallel device
branches that the cell is built around. Inactive sources are open circuits;
the exception is that during a reset the write ports are driven at 0 V,
because the erase current needs a return path to ground through them.
"""

from dataclasses import dataclass, field

import numpy as np

# Calibrated default for the ground (probe) resistor; 100 ohm is the
# uncalibrated starting value.
DEFAULT_R_GROUND = 200.0
UNCALIBRATED_R_GROUND = 100.0


class SingularNetwork(Exception):
    """The nodal system has no unique solution (floating subgraph or source loop)."""


class InvalidTopology(Exception):
    """Cell wiring description references an undefined option or is inconsistent."""


# ---------------------------------------------------------------------------
# Elements and netlist
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Resistor:
    a: int
    b: int
    ohms: float


@dataclass(frozen=True)
class MemristorRef:
    """Placeholder for device `device`; node a is the programming (+) terminal."""

    a: int
    b: int
    device: int


@dataclass(frozen=True)
class VoltageSource:
    """Ideal source forcing V(a) - V(b) = volts when active; open when not."""

    a: int
    b: int
    volts: float
    active: bool = True


@dataclass(frozen=True)
class Short:
    a: int
    b: int


class Netlist:
    """Immutable element list over nodes 0..node_count-1, node 0 = ground."""

    def __init__(self, node_count, elements, node_names=None):
        self.node_count = int(node_count)
        self.elements = tuple(elements)
        self.node_names = dict(node_names or {})
        if self.node_count < 1:
            raise ValueError("netlist needs at least the ground node")
        devices = set()
        for idx, el in enumerate(self.elements):
            for node in (el.a, el.b):
                if not 0 <= node < self.node_count:
                    raise ValueError(f"element {idx} references node {node} "
                                     f"outside 0..{self.node_count - 1}")
            if isinstance(el, Resistor) and el.ohms <= 0:
                raise ValueError(f"element {idx}: resistance must be positive, got {el.ohms}")
            if isinstance(el, MemristorRef):
                if el.device < 0:
                    raise ValueError(f"element {idx}: negative device index")
                devices.add(el.device)
        self.device_count = max(devices) + 1 if devices else 0

    def _node_label(self, n):
        return self.node_names.get(n, f"n{n}")

    def describe(self):
        """Human-readable element list for debugging."""
        lines = [f"netlist: {self.node_count} nodes, {len(self.elements)} elements"]
        for idx, el in enumerate(self.elements):
            a, b = self._node_label(el.a), self._node_label(el.b)
            if isinstance(el, Resistor):
                lines.append(f"[{idx:2d}] R {a}-{b} {el.ohms:g} ohm")
            elif isinstance(el, MemristorRef):
                lines.append(f"[{idx:2d}] M {a}(+)-{b}(-) device {el.device}")
            elif isinstance(el, VoltageSource):
                state = "on" if el.active else "off"
                lines.append(f"[{idx:2d}] V {a}-{b} {el.volts:g} V ({state})")
            elif isinstance(el, Short):
                lines.append(f"[{idx:2d}] short {a}-{b}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# MNA assembly and solve
# ---------------------------------------------------------------------------

class MnaTemplate:
    """Assembled nodal system for one fixed source configuration.

    Fixed resistors and source rows are stamped once; per-solve only the
    memristor conductances are added, so repeated solves over a transient
    (or a batch of cell instances) reuse the assembly. `source_values`
    overrides element defaults: a float forces that source on at the value,
    None forces it off, absent means use the element's own (volts, active).
    """

    def __init__(self, netlist, source_values=None):
        overrides = dict(source_values or {})
        self.netlist = netlist
        nv = netlist.node_count - 1

        active = []
        for idx, el in enumerate(netlist.elements):
            if isinstance(el, VoltageSource):
                if idx in overrides:
                    value = overrides.pop(idx)
                    if value is not None:
                        active.append((idx, float(value)))
                elif el.active:
                    active.append((idx, el.volts))
            elif isinstance(el, Short):
                active.append((idx, 0.0))
        if overrides:
            raise ValueError(f"source override for non-source element(s): {sorted(overrides)}")

        self.nv = nv
        self.m = nv + len(active)
        self.active_sources = tuple(active)
        self.source_row = {idx: nv + s for s, (idx, _) in enumerate(active)}

        a_mat = np.zeros((self.m, self.m))
        z = np.zeros(self.m)
        stamps = []
        for idx, el in enumerate(netlist.elements):
            if isinstance(el, Resistor):
                self._stamp_conductance(a_mat, el.a, el.b, 1.0 / el.ohms)
            elif isinstance(el, MemristorRef):
                stamps.append((el.device, el.a, el.b))
        for s, (idx, volts) in enumerate(active):
            el = netlist.elements[idx]
            row = nv + s
            if el.a > 0:
                a_mat[el.a - 1, row] += 1.0
                a_mat[row, el.a - 1] += 1.0
            if el.b > 0:
                a_mat[el.b - 1, row] -= 1.0
                a_mat[row, el.b - 1] -= 1.0
            z[row] = volts
        self.a_base = a_mat
        self.z_base = z
        self.device_stamps = tuple(stamps)

    @staticmethod
    def _stamp_conductance(a_mat, na, nb, g):
        if na > 0:
            a_mat[..., na - 1, na - 1] += g
        if nb > 0:
            a_mat[..., nb - 1, nb - 1] += g
        if na > 0 and nb > 0:
            a_mat[..., na - 1, nb - 1] -= g
            a_mat[..., nb - 1, na - 1] -= g

    def rhs(self, source_volts=None):
        """RHS vector with optional per-solve source voltages.

        source_volts maps element index -> value (may be batched arrays);
        only sources already active in this template can be re-valued.
        """
        if not source_volts:
            return self.z_base.copy()
        batch = ()
        for value in source_volts.values():
            batch = np.broadcast_shapes(batch, np.shape(value))
        z = np.broadcast_to(self.z_base, batch + (self.m,)).copy()
        for idx, value in source_volts.items():
            z[..., self.source_row[idx]] = value
        return z

    def solve(self, device_conductances=None, z=None):
        """Solve; returns (node_voltages, source_currents), batched if inputs are.

        device_conductances has trailing dimension = netlist.device_count.
        Source currents follow element order of the template's active list,
        oriented a->b through the source.
        """
        g_dev = None
        if self.device_stamps:
            if device_conductances is None:
                raise ValueError("netlist has memristors; device conductances required")
            g_dev = np.atleast_1d(np.asarray(device_conductances, dtype=float))
            if g_dev.shape[-1] < self.netlist.device_count:
                raise ValueError("missing device conductances")
        if z is None:
            z = self.z_base
        batch = np.broadcast_shapes(
            z.shape[:-1], () if g_dev is None else g_dev.shape[:-1])
        a_mat = np.broadcast_to(self.a_base, batch + (self.m, self.m)).copy()
        for dev, na, nb in self.device_stamps:
            self._stamp_conductance(a_mat, na, nb, g_dev[..., dev])
        z = np.broadcast_to(z, batch + (self.m,))
        try:
            x = np.linalg.solve(a_mat, z[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SingularNetwork(f"nodal system is singular: {exc}") from None
        if not np.isfinite(x).all():
            raise SingularNetwork("nodal solve produced non-finite voltages")
        residual = np.abs(a_mat @ x[..., None] - z[..., None]).max()
        if residual > 1e-6 * max(1.0, float(np.abs(z).max())):
            raise SingularNetwork(f"nodal solve residual {residual:g} indicates "
                                  "an ill-conditioned (floating?) network")
        volts = np.zeros(batch + (self.netlist.node_count,))
        volts[..., 1:] = x[..., :self.nv]
        return volts, x[..., self.nv:]


@dataclass
class SolveResult:
    """DC operating point: per-node voltages and per-element currents (a->b)."""

    node_voltages: np.ndarray
    element_currents: np.ndarray
    total_source_power: float
    netlist: Netlist


def solve_dc(netlist, device_resistances=(), source_values=None):
    """Solve the network DC operating point.

    device_resistances[i] is the present resistance of memristor i.
    source_values optionally overrides sources: float = on at that value,
    None = off. Raises SingularNetwork for topologies without a unique
    solution.
    """
    template = MnaTemplate(netlist, source_values)
    res = np.atleast_1d(np.asarray(device_resistances, dtype=float))
    if netlist.device_count and res.shape[-1] < netlist.device_count:
        raise ValueError(f"need {netlist.device_count} device resistances, got {res.size}")
    g = 1.0 / res if netlist.device_count else None
    volts, i_src = template.solve(g)

    currents = np.zeros(len(netlist.elements))
    source_power = 0.0
    for idx, el in enumerate(netlist.elements):
        if isinstance(el, Resistor):
            currents[idx] = (volts[el.a] - volts[el.b]) / el.ohms
        elif isinstance(el, MemristorRef):
            currents[idx] = (volts[el.a] - volts[el.b]) / res[el.device]
        elif idx in template.source_row:
            i = i_src[template.source_row[idx] - template.nv]
            currents[idx] = i
            value = dict(template.active_sources)[idx]
            source_power += -value * i
    return SolveResult(volts, currents, source_power, netlist)


def network_power(result: SolveResult):
    """Total power dissipated in the passive elements (I squared R)."""
    total = 0.0
    volts = result.node_voltages
    for idx, el in enumerate(result.netlist.elements):
        if isinstance(el, (Resistor, MemristorRef)):
            total += result.element_currents[idx] * (volts[el.a] - volts[el.b])
    return total


def kcl_residual(result: SolveResult):
    """Largest absolute net current into any non-ground node."""
    sums = np.zeros(result.netlist.node_count)
    for idx, el in enumerate(result.netlist.elements):
        i = result.element_currents[idx]
        sums[el.a] -= i
        sums[el.b] += i
    return float(np.abs(sums[1:]).max()) if result.netlist.node_count > 1 else 0.0


# ---------------------------------------------------------------------------
# Multi-level cell topology
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellWiring:
    """Declarative choices for the parts of the cell wiring that are tunable.

    read_attach: "write_side_rail" puts the switchable read sources on the
    device programming terminals (the wiring the defaults are calibrated
    for); "membrane" attaches a single read source to the membrane node
    instead, which leaves the read path outside the devices and is kept
    only so that variant can be inspected.
    """

    read_attach: str = "write_side_rail"
    ground_write_ports_during_reset: bool = True
    read_series_ohms: float = 0.0

    def __post_init__(self):
        if self.read_attach not in ("write_side_rail", "membrane"):
            raise InvalidTopology(f"unknown read_attach {self.read_attach!r}")
        if self.read_series_ohms < 0:
            raise InvalidTopology("read_series_ohms must be nonnegative")


@dataclass(frozen=True)
class CellTopology:
    """Geometry of the cell: sub-cell count and port resistor values.

    r_series and r_write accept either a single value or one per sub-cell;
    unequal per-sub-cell values unlock the larger code space, equal values
    collapse permuted codes onto the same read-out level.
    """

    n_subcells: int = 3
    r_series: object = 500.0
    r_write: object = 1500.0
    r_ground: float = DEFAULT_R_GROUND
    wiring: CellWiring = field(default_factory=CellWiring)

    def __post_init__(self):
        if self.n_subcells < 1:
            raise InvalidTopology(f"n_subcells must be >= 1, got {self.n_subcells}")
        if self.r_ground <= 0:
            raise InvalidTopology("r_ground must be positive")
        for name in ("r_series", "r_write"):
            for value in self.per_subcell(name):
                if value <= 0:
                    raise InvalidTopology(f"{name} values must be positive")

    def per_subcell(self, name):
        value = getattr(self, name)
        if np.isscalar(value):
            return (float(value),) * self.n_subcells
        values = tuple(float(v) for v in value)
        if len(values) != self.n_subcells:
            raise InvalidTopology(f"{name} needs 1 or {self.n_subcells} values, "
                                  f"got {len(values)}")
        return values


@dataclass(frozen=True)
class CellPorts:
    """Element/node handles into the built cell netlist."""

    write: tuple            # write source element index per sub-cell
    reset: tuple            # reset source element indices (one per device terminal)
    read: tuple             # read source element indices
    devices: tuple          # memristor element index per sub-cell
    probe_node: int         # V_out is the voltage of this node (across r_ground)
    membrane_node: int
    n_devices: int


def build_mlm_cell(topology: CellTopology):
    """Build the cell netlist; returns (netlist, ports).

    All sources are created inactive; the cycle controller switches them
    per phase via solve-time overrides.
    """
    n = topology.n_subcells
    r_series = topology.per_subcell("r_series")
    r_write = topology.per_subcell("r_write")
    wiring = topology.wiring

    names = {0: "gnd", 1: "mem"}
    next_node = 2

    def new_node(label):
        nonlocal next_node
        node = next_node
        names[node] = label
        next_node += 1
        return node

    membrane = 1
    elements = []
    dev_elems = []
    p_nodes = []
    n_nodes = []
    sw_nodes = []
    for i in range(n):
        p = new_node(f"p{i + 1}")
        nneg = new_node(f"q{i + 1}")
        sw = new_node(f"w{i + 1}")
        p_nodes.append(p)
        n_nodes.append(nneg)
        sw_nodes.append(sw)
        elements.append(Resistor(sw, p, r_write[i]))
        dev_elems.append(len(elements))
        elements.append(MemristorRef(p, nneg, device=i))
        elements.append(Resistor(nneg, membrane, r_series[i]))
    elements.append(Resistor(membrane, 0, topology.r_ground))

    write_srcs = []
    for i in range(n):
        write_srcs.append(len(elements))
        elements.append(VoltageSource(sw_nodes[i], 0, 0.0, active=False))

    reset_srcs = []
    for i in range(n):
        reset_srcs.append(len(elements))
        elements.append(VoltageSource(n_nodes[i], 0, 0.0, active=False))

    read_srcs = []
    if wiring.read_attach == "write_side_rail":
        for i in range(n):
            attach = p_nodes[i]
            if wiring.read_series_ohms > 0:
                tap = new_node(f"r{i + 1}")
                elements.append(Resistor(tap, p_nodes[i], wiring.read_series_ohms))
                attach = tap
            read_srcs.append(len(elements))
            elements.append(VoltageSource(attach, 0, 0.0, active=False))
    else:  # "membrane"
        read_srcs.append(len(elements))
        elements.append(VoltageSource(membrane, 0, 0.0, active=False))

    netlist = Netlist(next_node, elements, names)
    ports = CellPorts(
        write=tuple(write_srcs),
        reset=tuple(reset_srcs),
        read=tuple(read_srcs),
        devices=tuple(dev_elems),
        probe_node=membrane,
        membrane_node=membrane,
        n_devices=n,
    )
    return netlist, ports
