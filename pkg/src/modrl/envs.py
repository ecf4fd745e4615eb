"""Symbolic grid and Pong environments with sparse rewards.

Each environment instance owns a private numpy Generator seeded at reset,
so a batch of instances stepped in lockstep gives the same results in any
execution order. Observations are relative entity coordinates normalised
to [-1, 1] (grid kinds) or raw court coordinates (Pong).

Grid positions are stored internally as flat cell indices with precomputed
move/neighbour tables; the ``agent``/``goal``/``obstacles``/``keys``
properties expose them as coordinate tuples.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

GRID_KINDS = ("do", "do3d", "g2k")
KINDS = GRID_KINDS + ("pong",)

GRID_DIMS = {"do": (4, 4), "do3d": (3, 3, 2), "g2k": (4, 4)}
N_ACTIONS = {"do": 4, "do3d": 6, "g2k": 4, "pong": 3}
MAX_STEPS = 100  # grid episode limit

# action order: up/down on y, left/right on x, fwd/bwd on z
_DELTAS_2D = ((0, 1), (0, -1), (-1, 0), (1, 0))
_DELTAS_3D = ((0, 1, 0), (0, -1, 0), (-1, 0, 0), (1, 0, 0), (0, 0, 1), (0, 0, -1))

ACTION_NAMES = {
    "do": ("up", "down", "left", "right"),
    "g2k": ("up", "down", "left", "right"),
    "do3d": ("up", "down", "left", "right", "fwd", "bwd"),
    "pong": ("up", "down", "noop"),
}


class StepResult(NamedTuple):
    obs: np.ndarray
    reward: float
    done: bool
    cause: str  # one of: goal, collision, wrong-key, timeout, game-over, none


def axis_groups(kind: str) -> dict[int, str]:
    """Map each action index to its movement-axis group label."""
    if kind in ("do", "g2k"):
        return {0: "up/down", 1: "up/down", 2: "left/right", 3: "left/right"}
    if kind == "do3d":
        return {0: "up/down", 1: "up/down", 2: "left/right", 3: "left/right",
                4: "fwd/bwd", 5: "fwd/bwd"}
    if kind == "pong":
        return {0: "up/down", 1: "up/down", 2: "noop"}
    raise ValueError(f"unknown env kind: {kind!r}")


def obs_dim(kind: str, mask_opponent: bool = False) -> int:
    if kind == "do":
        return 8
    if kind == "do3d":
        return 12
    if kind == "g2k":
        return 5
    if kind == "pong":
        return 5 if mask_opponent else 6
    raise ValueError(f"unknown env kind: {kind!r}")


def observation_labels(kind: str, mask_opponent: bool = False) -> list[str]:
    """Human-readable names for each observation feature, in column order."""
    if kind == "do":
        return ["goal.dx", "goal.dy", "ob1.dx", "ob1.dy", "ob2.dx", "ob2.dy",
                "ob3.dx", "ob3.dy"]
    if kind == "do3d":
        out = ["goal.dx", "goal.dy", "goal.dz"]
        for i in (1, 2, 3):
            out += [f"ob{i}.dx", f"ob{i}.dy", f"ob{i}.dz"]
        return out
    if kind == "g2k":
        return ["key0.dx", "key0.dy", "key1.dx", "key1.dy", "key.id"]
    if kind == "pong":
        feats = ["pad.y", "opp.y", "ball.x", "ball.y", "ball.vx", "ball.vy"]
        if mask_opponent:
            feats.remove("opp.y")
        return feats
    raise ValueError(f"unknown env kind: {kind!r}")


class _GridTables:
    """Flat-cell lookup tables shared by all instances of one grid kind."""

    def __init__(self, kind: str):
        dims = GRID_DIMS[kind]
        nd = len(dims)
        deltas = _DELTAS_3D if kind == "do3d" else _DELTAS_2D
        n = 1
        for d in dims:
            n *= d
        coords = []
        for cell in range(n):
            rem, c = cell, []
            for d in dims:
                c.append(rem % d)
                rem //= d
            coords.append(tuple(c))
        scale = tuple(1.0 / (d - 1) if d > 1 else 1.0 for d in dims)
        self.dims, self.ndim, self.n_cells = dims, nd, n
        self.coords = coords
        self.scaled = [tuple(c[i] * scale[i] for i in range(nd)) for c in coords]
        self.cell_of = {c: i for i, c in enumerate(coords)}
        # move[a][cell]: destination with off-grid moves clamped in place
        self.move = []
        for delta in deltas:
            row = []
            for c in coords:
                tgt = tuple(min(max(c[i] + delta[i], 0), dims[i] - 1)
                            for i in range(nd))
                row.append(self.cell_of[tgt])
            self.move.append(row)
        # nbrs[cell]: strictly in-bounds adjacent cells (no stay-in-place)
        self.nbrs = []
        for c in coords:
            adj = []
            for delta in deltas:
                tgt = tuple(c[i] + delta[i] for i in range(nd))
                if all(0 <= tgt[i] < dims[i] for i in range(nd)):
                    adj.append(self.cell_of[tgt])
            self.nbrs.append(tuple(adj))


_TABLES: dict[str, _GridTables] = {}


def _tables(kind: str) -> _GridTables:
    if kind not in _TABLES:
        _TABLES[kind] = _GridTables(kind)
    return _TABLES[kind]


class GridEnv:
    """Dynamic-obstacle and go-to-key grids with a 100-step limit.

    Actions move the agent one cell along an axis; moves off-grid are
    no-ops that still cost a step. After the agent moves, each obstacle
    takes one uniformly random step to a free in-bounds neighbour (never
    onto the agent, the goal, or another obstacle), or stays put.
    """

    def __init__(self, kind: str, seed):
        if kind not in GRID_KINDS:
            raise ValueError(f"not a grid kind: {kind!r}")
        self.kind = kind
        self._t = _tables(kind)
        self.dims = self._t.dims
        self.ndim = self._t.ndim
        self.n_actions = N_ACTIONS[kind]
        self.obs_dim = obs_dim(kind)
        self.rng = np.random.default_rng(seed)
        self.reset()

    # cell index <-> coordinate-tuple views, so tests can build states directly
    @property
    def agent(self):
        return self._t.coords[self._agent]

    @agent.setter
    def agent(self, pos):
        self._agent = self._t.cell_of[tuple(pos)]

    @property
    def goal(self):
        return None if self._goal < 0 else self._t.coords[self._goal]

    @goal.setter
    def goal(self, pos):
        self._goal = -1 if pos is None else self._t.cell_of[tuple(pos)]

    @property
    def obstacles(self):
        return [self._t.coords[c] for c in self._obstacles]

    @obstacles.setter
    def obstacles(self, positions):
        self._obstacles = [self._t.cell_of[tuple(p)] for p in positions]

    @property
    def keys(self):
        return [self._t.coords[c] for c in self._keys]

    @keys.setter
    def keys(self, positions):
        self._keys = [self._t.cell_of[tuple(p)] for p in positions]

    def reset(self, seed=None) -> np.ndarray:
        """Start a new episode; reseeds the env RNG when a seed is given."""
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        cells = self.rng.permutation(self._t.n_cells)
        if self.kind == "g2k":
            self._agent = int(cells[0])
            self._keys = [int(cells[1]), int(cells[2])]
            self.target_key = int(self.rng.integers(2))
            self._obstacles = []
            self._goal = self._keys[self.target_key]
        else:
            self._agent = int(cells[0])
            self._goal = int(cells[1])
            self._obstacles = [int(cells[2]), int(cells[3]), int(cells[4])]
            self._keys = []
            self.target_key = -1
        self.t = 0
        self.done = False
        self.cause = "none"
        return self.observe()

    def observe(self) -> np.ndarray:
        """Relative entity coordinates scaled by (grid extent - 1)."""
        scaled = self._t.scaled
        sa = scaled[self._agent]
        nd = self.ndim
        feats = []
        if self.kind == "g2k":
            for k in self._keys:
                sk = scaled[k]
                for i in range(nd):
                    feats.append(sk[i] - sa[i])
            feats.append(1.0 if self.target_key == 1 else -1.0)
        else:
            for ent in (self._goal, *self._obstacles):
                se = scaled[ent]
                for i in range(nd):
                    feats.append(se[i] - sa[i])
        return np.asarray(feats, dtype=np.float64)

    def step(self, action: int) -> StepResult:
        if self.done:
            raise RuntimeError("step() called on a finished episode")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range for {self.kind}")
        pos = self._t.move[action][self._agent]
        self._agent = pos

        reward, cause = 0.0, "none"
        if self.kind == "g2k":
            if pos == self._keys[self.target_key]:
                reward, cause = 1.0, "goal"
            elif pos == self._keys[1 - self.target_key]:
                cause = "wrong-key"
        else:
            if pos == self._goal:
                reward, cause = 1.0, "goal"
            elif pos in self._obstacles:
                cause = "collision"
            else:
                self._move_obstacles()
                if pos in self._obstacles:  # unreachable by construction; guard
                    cause = "collision"

        self.t += 1
        if cause == "none" and self.t >= MAX_STEPS:
            cause = "timeout"
        self.done = cause != "none"
        self.cause = cause
        return StepResult(self.observe(), reward, self.done, cause)

    def _move_obstacles(self) -> None:
        obs = self._obstacles
        nbrs = self._t.nbrs
        agent, goal = self._agent, self._goal
        for i in range(len(obs)):
            choices = [c for c in nbrs[obs[i]]
                       if c != agent and c != goal and c not in obs]
            if len(choices) > 1:
                obs[i] = choices[int(self.rng.integers(len(choices)))]
            elif choices:
                obs[i] = choices[0]


class PongEnv:
    """Two-paddle Pong on a unit court against a follow-ball opponent.

    The agent controls the right paddle (up/down/noop). Points score +1/-1
    and the game ends when either side reaches ``points_to_win``. Physics
    constants are free parameters; the defaults leave the opponent slightly
    slower than an edge-deflected ball so the game is winnable.
    """

    kind = "pong"

    def __init__(self, seed, mask_opponent: bool = False,
                 paddle_speed: float = 0.04, opponent_speed: float = 0.03,
                 ball_speed: float = 0.03, deflect_vy: float = 0.045,
                 paddle_half: float = 0.1, points_to_win: int = 21,
                 max_ticks: int = 10000):
        self.mask_opponent = mask_opponent
        self.n_actions = N_ACTIONS["pong"]
        self.obs_dim = obs_dim("pong", mask_opponent)
        self.paddle_speed = paddle_speed
        self.opponent_speed = opponent_speed
        self.ball_speed = ball_speed
        self.deflect_vy = deflect_vy
        self.paddle_half = paddle_half
        self.points_to_win = points_to_win
        self.max_ticks = max_ticks
        self.rng = np.random.default_rng(seed)
        self.reset()

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.agent_y = 0.5
        self.opp_y = 0.5
        self.score_agent = 0
        self.score_opp = 0
        self.t = 0
        self.done = False
        self.cause = "none"
        self._serve()
        return self.observe()

    def _serve(self) -> None:
        self.ball_x = 0.5
        self.ball_y = 0.5
        side = 1.0 if self.rng.random() < 0.5 else -1.0
        self.ball_vx = side * self.ball_speed
        self.ball_vy = float(self.rng.uniform(-0.5, 0.5)) * self.ball_speed

    def observe(self) -> np.ndarray:
        v = 1.0 / self.ball_speed  # velocities scaled to unit magnitude
        feats = [self.agent_y, self.opp_y, self.ball_x, self.ball_y,
                 self.ball_vx * v, self.ball_vy * v]
        if self.mask_opponent:
            del feats[1]
        return np.asarray(feats, dtype=np.float64)

    def step(self, action: int) -> StepResult:
        if self.done:
            raise RuntimeError("step() called on a finished episode")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range for pong")

        if action == 0:
            self.agent_y += self.paddle_speed
        elif action == 1:
            self.agent_y -= self.paddle_speed
        h = self.paddle_half
        self.agent_y = min(max(self.agent_y, h), 1.0 - h)

        dy = self.ball_y - self.opp_y
        self.opp_y += min(max(dy, -self.opponent_speed), self.opponent_speed)
        self.opp_y = min(max(self.opp_y, h), 1.0 - h)

        self.ball_x += self.ball_vx
        self.ball_y += self.ball_vy
        if self.ball_y < 0.0:
            self.ball_y = -self.ball_y
            self.ball_vy = -self.ball_vy
        elif self.ball_y > 1.0:
            self.ball_y = 2.0 - self.ball_y
            self.ball_vy = -self.ball_vy

        reward = 0.0
        if self.ball_x >= 1.0:
            off = self.ball_y - self.agent_y
            if abs(off) <= h:
                self.ball_x = 2.0 - self.ball_x
                self.ball_vx = -abs(self.ball_vx)
                self.ball_vy = (off / h) * self.deflect_vy
            else:
                reward = -1.0
                self.score_opp += 1
                self._serve()
        elif self.ball_x <= 0.0:
            off = self.ball_y - self.opp_y
            if abs(off) <= h:
                self.ball_x = -self.ball_x
                self.ball_vx = abs(self.ball_vx)
                self.ball_vy = (off / h) * self.deflect_vy
            else:
                reward = 1.0
                self.score_agent += 1
                self._serve()

        cause = "none"
        if max(self.score_agent, self.score_opp) >= self.points_to_win:
            cause = "game-over"
        self.t += 1
        if cause == "none" and self.t >= self.max_ticks:
            cause = "timeout"
        self.done = cause != "none"
        self.cause = cause
        return StepResult(self.observe(), reward, self.done, cause)


def make_env(kind: str, seed, mask_opponent: bool = False, **pong_kw):
    """Construct an environment instance for the given kind."""
    if kind in GRID_KINDS:
        if mask_opponent or pong_kw:
            raise ValueError("opponent masking / physics options are pong-only")
        return GridEnv(kind, seed)
    if kind == "pong":
        return PongEnv(seed, mask_opponent=mask_opponent, **pong_kw)
    raise ValueError(f"unknown env kind: {kind!r}")
