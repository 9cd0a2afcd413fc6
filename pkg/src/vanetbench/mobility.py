"""Microscopic vehicle motion: IDM car following, intersection handling, MOBIL lane changes."""

import math
from dataclasses import dataclass, replace

from .roadnet import RoadGraph, Trip, plan_trip

EMERGENCY_BRAKE_FACTOR = 3.0   # multiple of comfortable deceleration when gap <= 0


@dataclass
class IdmParams:
    a_max: float = 0.6
    b: float = 0.9
    s0: float = 1.0
    headway: float = 0.5
    v0: float = 80 / 3.6        # desired speed; per-vehicle, drawn at spawn
    length: float = 5.0
    visibility: float = 200.0
    recalc_step: float = 1.0


@dataclass
class MobilParams:
    politeness: float = 0.5
    accel_threshold: float = 0.5
    safe_decel_limit: float = 0.9


@dataclass
class VirtualLeader:
    """Standing zero-length obstacle (stop line) expressed as a leader."""

    offset: float
    speed: float = 0.0
    length: float = 0.0


@dataclass
class VehicleState:
    vehicle_id: int
    edge: str | None            # None while paused at a vertex
    lane: int
    offset: float
    speed: float
    accel: float
    trip: Trip
    waypoint_index: int
    idm: IdmParams
    paused_until: float = -1.0
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0

    @property
    def driving(self) -> bool:
        return self.edge is not None

    @property
    def length(self) -> float:
        return self.idm.length


def idm_acceleration(v: float, v0: float, gap: float, dv: float, p: IdmParams) -> float:
    """Car-following acceleration; gap = inf means free road, gap <= 0 brakes hard."""
    if gap <= 0:
        return -EMERGENCY_BRAKE_FACTOR * p.b
    free = (v / v0) ** 4
    if math.isinf(gap):
        interaction = 0.0
    else:
        # dynamic part clamped at zero: a fast-receding leader must not brake us
        dynamic = v * p.headway + v * dv / (2.0 * math.sqrt(p.a_max * p.b))
        s_star = p.s0 + (dynamic if dynamic > 0.0 else 0.0)
        interaction = (s_star / gap) ** 2
    return p.a_max * (1.0 - free - interaction)


def intersection_constraint(vehicle: VehicleState, graph: RoadGraph, lights: dict,
                            t: float, p: IdmParams) -> VirtualLeader | None:
    """Virtual standing leader at the stop line when the edge end shows red.

    Applies only to the first vehicle in its lane; border intersections and
    anything beyond visibility are ignored. The stop line sits one jam
    distance before the edge end so the standstill gap stays meaningful.
    """
    edge = graph.edges[vehicle.edge]
    light = lights.get(edge.dst)
    if light is None or graph.is_border_vertex(edge.dst):
        return None
    if light.is_green(edge.id, t):
        return None
    stop_line = edge.length - p.s0
    distance = stop_line - vehicle.offset
    if distance <= 0 or distance > p.visibility:
        return None
    return VirtualLeader(offset=stop_line)


@dataclass
class LaneNeighbors:
    """Leader/follower pair seen from one vehicle's longitudinal position in a lane."""

    leader: object = None       # VehicleState or VirtualLeader or None
    follower: object = None


def _gap(behind_offset: float, ahead) -> float:
    return ahead.offset - ahead.length - behind_offset


def _accel_towards(v0, p, subject_offset, subject_speed, ahead) -> float:
    if ahead is None:
        return idm_acceleration(subject_speed, v0, math.inf, 0.0, p)
    gap = _gap(subject_offset, ahead)
    dv = subject_speed - ahead.speed
    return idm_acceleration(subject_speed, v0, gap, dv, p)


def mobil_decide(vehicle: VehicleState, current: LaneNeighbors,
                 candidates: dict[int, LaneNeighbors],
                 m: MobilParams, p: IdmParams) -> int | None:
    """Lane-change decision: politeness-weighted acceleration gain vs threshold.

    Returns the target lane index, or None to stay. Safety veto: the
    prospective follower must not need braking beyond the safe limit, and
    physical clearance to both target-lane neighbors is required.
    """
    def own_accel(ahead):
        return _accel_towards(vehicle.idm.v0, p, vehicle.offset, vehicle.speed, ahead)

    a_self_old = own_accel(current.leader)
    best_lane = None
    best_incentive = m.accel_threshold
    for lane in sorted(candidates):
        nb = candidates[lane]
        # clearance: never change into an overlap
        if nb.leader is not None and _gap(vehicle.offset, nb.leader) <= 0:
            continue
        if nb.follower is not None and _gap(nb.follower.offset, vehicle) <= 0:
            continue
        a_self_new = own_accel(nb.leader)
        a_nf_old = a_nf_new = 0.0
        if nb.follower is not None:
            f = nb.follower
            a_nf_old = _accel_towards(f.idm.v0, p, f.offset, f.speed, nb.leader)
            a_nf_new = _accel_towards(f.idm.v0, p, f.offset, f.speed, vehicle)
            if a_nf_new < -m.safe_decel_limit:
                continue
        a_of_old = a_of_new = 0.0
        if current.follower is not None:
            f = current.follower
            a_of_old = _accel_towards(f.idm.v0, p, f.offset, f.speed, vehicle)
            a_of_new = _accel_towards(f.idm.v0, p, f.offset, f.speed, current.leader)
        incentive = (a_self_new - a_self_old) + m.politeness * (
            (a_nf_new - a_nf_old) + (a_of_new - a_of_old))
        if incentive > best_incentive:
            best_incentive = incentive
            best_lane = lane
    return best_lane


class VehicleWorld:
    """Owns all vehicle states; advances them synchronously from a per-step snapshot."""

    def __init__(self, graph: RoadGraph, cfg, n_vehicles: int, rng, lane_changes: bool):
        self.graph = graph
        self.cfg = cfg
        self.rng = rng
        self.lane_changes = lane_changes
        self.mobil = MobilParams(cfg.politeness, cfg.accel_threshold,
                                 cfg.safe_decel_limit if cfg.safe_decel_limit is not None
                                 else cfg.b)
        self.vehicles: dict[int, VehicleState] = {}
        self.now = 0.0
        self._steps = 0
        self._recalc_every = max(1, round(cfg.recalc_step / cfg.integration_dt))
        self.emergency_warnings = 0
        self.lane_change_count = 0
        self.brake_listeners: list = []    # callables (vehicle_id, accel, t)
        self._base_idm = IdmParams(cfg.a_max, cfg.b, cfg.s0, cfg.headway,
                                   0.0, cfg.vehicle_length, cfg.visibility,
                                   cfg.recalc_step)
        for vid in range(n_vehicles):
            self._spawn_initial(vid)

    # -- spawning ----------------------------------------------------------

    def _draw_idm(self) -> IdmParams:
        v0 = float(self.rng.uniform(self.cfg.v_min_kmh, self.cfg.v_max_kmh)) / 3.6
        return replace(self._base_idm, v0=v0)

    def _spawn_initial(self, vid: int):
        g = self.graph
        origins = sorted(g.vertices)
        idm = self._draw_idm()
        st = None
        for _attempt in range(200):
            origin = origins[int(self.rng.integers(0, len(origins)))]
            trip = plan_trip(self.rng, g, origin, self.cfg.min_stay, self.cfg.max_stay)
            edge = g.edges[trip.path[0]]
            lane = int(self.rng.integers(0, edge.lane_count))
            span = max(0.0, edge.length - idm.length - idm.s0)
            offset = float(self.rng.uniform(0.0, span)) if span > 0 else 0.0
            if self._clear_at(edge.id, lane, offset, idm):
                st = VehicleState(vid, edge.id, lane, offset, 0.0, 0.0, trip, 0, idm)
                break
        if st is None:
            # dense map: hold the vehicle at its origin and enter when space opens
            st = VehicleState(vid, None, 0, 0.0, 0.0, 0.0, trip, 0, idm, paused_until=0.0)
        self._update_xy(st)
        self.vehicles[vid] = st

    def _clear_at(self, edge_id: str, lane: int, offset: float, idm: IdmParams) -> bool:
        for other in self.vehicles.values():
            if other.driving and other.edge == edge_id and other.lane == lane:
                if other.offset >= offset:
                    if other.offset - other.length - offset < idm.s0:
                        return False
                elif offset - idm.length - other.offset < idm.s0:
                    return False
        return True

    def _try_respawn(self, st: VehicleState):
        """Re-enter traffic on the first edge of the pending trip if there is room."""
        edge = self.graph.edges[st.trip.path[0]]
        if not self._clear_at(edge.id, st.lane, 0.0, st.idm):
            return False
        st.edge = edge.id
        st.offset = 0.0
        st.speed = 0.0
        st.waypoint_index = 0
        self._update_xy(st)
        return True

    # -- geometry ----------------------------------------------------------

    def _update_xy(self, st: VehicleState):
        if st.driving:
            st.x, st.y = self.graph.edge_point(st.edge, st.offset)
            st.heading = self.graph.edge_heading(st.edge)
        else:
            v = self.graph.vertices[st.trip.origin]
            st.x, st.y = v.x, v.y
            st.heading = 0.0

    def position(self, vid: int) -> tuple[float, float]:
        st = self.vehicles[vid]
        return (st.x, st.y)

    # -- stepping ----------------------------------------------------------

    def _lane_occupancy(self):
        occ: dict[tuple[str, int], list[VehicleState]] = {}
        for st in self.vehicles.values():
            if st.driving:
                occ.setdefault((st.edge, st.lane), []).append(st)
        for group in occ.values():
            group.sort(key=lambda s: (s.offset, s.vehicle_id))
        return occ

    def _leader_for(self, st: VehicleState, occ, idx_in_lane, lane_group):
        """Real leader in lane, look-ahead onto the next trip edge, or red-light stop.

        Returns (leader-or-None, gap, leader-speed); gap is measured from this
        vehicle's front bumper in its own edge coordinates.
        """
        cfg = self.cfg
        leader = lane_group[idx_in_lane + 1] if idx_in_lane + 1 < len(lane_group) else None
        edge = self.graph.edges[st.edge]
        candidates = []
        if leader is not None:
            candidates.append((leader.offset - leader.length - st.offset, leader.speed))
        else:
            # first in lane: traffic light, then look-ahead into the next edge
            vl = intersection_constraint(st, self.graph, self.graph.lights, self.now, st.idm)
            if vl is not None:
                candidates.append((vl.offset - st.offset, 0.0))
            remaining = edge.length - st.offset
            if remaining <= cfg.visibility and st.waypoint_index + 1 < len(st.trip.path):
                nxt = self.graph.edges[st.trip.path[st.waypoint_index + 1]]
                nlane = min(st.lane, nxt.lane_count - 1)
                ahead = occ.get((nxt.id, nlane))
                if ahead:
                    first = ahead[0]
                    candidates.append((remaining + first.offset - first.length, first.speed))
        if not candidates:
            return math.inf, 0.0
        return min(candidates, key=lambda c: c[0])

    def step(self, dt: float):
        """One synchronous world update: accelerations from the snapshot, then integrate."""
        cfg = self.cfg
        occ = self._lane_occupancy()
        do_lanes = self.lane_changes and (self._steps % self._recalc_every == 0)
        plans: list[tuple[VehicleState, float, object]] = []
        lane_moves: list[tuple[VehicleState, int]] = []

        for group in occ.values():
            for i, st in enumerate(group):
                gap, leader_speed = self._leader_for(st, occ, i, group)
                if gap <= 0:
                    self.emergency_warnings += 1
                a = idm_acceleration(st.speed, st.idm.v0, gap, st.speed - leader_speed,
                                     st.idm)
                st.accel = a
                for listener in self.brake_listeners:
                    listener(st.vehicle_id, a, self.now)
                # hold the jam distance: the underdamped approach would otherwise
                # creep inside s0 of a standing leader and rest there
                bound = None
                if math.isfinite(gap):
                    bound = st.offset + max(0.0, gap - st.idm.s0)
                plans.append((st, a, bound))
                if do_lanes:
                    target = self._consider_lane_change(st, occ, group, i)
                    if target is not None:
                        lane_moves.append((st, target))

        for st, target in lane_moves:
            st.lane = target
            self.lane_change_count += 1

        for st, a, bound in plans:
            v_next = st.speed + a * dt
            if v_next < 0.0:
                t_stop = st.speed / -a if a < 0 else 0.0
                advance = st.speed * t_stop + 0.5 * a * t_stop * t_stop
                v_next = 0.0
            else:
                advance = st.speed * dt + 0.5 * a * dt * dt
            new_offset = st.offset + max(0.0, advance)
            if bound is not None and new_offset > bound >= st.offset:
                new_offset = bound
                v_next = 0.0
                self.emergency_warnings += 1
            st.offset = new_offset
            st.speed = v_next
            self._advance_waypoints(st)

        self._handle_paused()
        for st in self.vehicles.values():
            self._update_xy(st)
        self._steps += 1
        self.now += dt

    def _consider_lane_change(self, st, occ, group, idx):
        edge = self.graph.edges[st.edge]
        if edge.lane_count < 2:
            return None
        current = LaneNeighbors(
            leader=group[idx + 1] if idx + 1 < len(group) else None,
            follower=group[idx - 1] if idx > 0 else None)
        if current.leader is None:
            vl = intersection_constraint(st, self.graph, self.graph.lights, self.now, st.idm)
            if vl is not None:
                current = LaneNeighbors(leader=vl, follower=current.follower)
        candidates = {}
        for lane in (st.lane - 1, st.lane + 1):
            if not 0 <= lane < edge.lane_count:
                continue
            others = occ.get((st.edge, lane), [])
            leader = follower = None
            for o in others:
                if o.offset >= st.offset:
                    leader = o
                    break
                follower = o
            if leader is None:
                vl = intersection_constraint(st, self.graph, self.graph.lights,
                                             self.now, st.idm)
                leader = vl
            candidates[lane] = LaneNeighbors(leader=leader, follower=follower)
        if not candidates:
            return None
        return mobil_decide(st, current, candidates, self.mobil, st.idm)

    def _advance_waypoints(self, st: VehicleState):
        edge = self.graph.edges[st.edge]
        while st.offset >= edge.length:
            if st.waypoint_index + 1 >= len(st.trip.path):
                # arrival: park at the destination vertex, then re-plan
                st.offset = edge.length
                st.edge = None
                st.speed = 0.0
                st.accel = 0.0
                st.paused_until = self.now + st.trip.pause
                st.trip = Trip(st.trip.destination, st.trip.destination, [], 0.0)
                return
            leftover = st.offset - edge.length
            st.waypoint_index += 1
            edge = self.graph.edges[st.trip.path[st.waypoint_index]]
            st.edge = edge.id
            st.lane = min(st.lane, edge.lane_count - 1)
            st.offset = leftover

    def _handle_paused(self):
        for st in self.vehicles.values():
            if st.driving or self.now < st.paused_until:
                continue
            if not st.trip.path:
                origin = st.trip.origin
                st.trip = plan_trip(self.rng, self.graph, origin,
                                    self.cfg.min_stay, self.cfg.max_stay)
                edge = self.graph.edges[st.trip.path[0]]
                st.lane = int(self.rng.integers(0, edge.lane_count))
            self._try_respawn(st)
