"""Native byte-state games exposing a 128-byte RAM-style observation.

Both games are integer-only and draw randomness from the generator handed to
``reset``, so a seed plus an action sequence determines every frame.
"""

from __future__ import annotations

import numpy as np

RAM_SIZE = 128


class Game:
    """One tick of game logic; frame skip, sticky actions etc. live in the env."""

    name = ""
    n_actions = 0
    annotation: tuple[tuple[int, int], ...] = ()

    def reset(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def tick(self, a1: int, a2: int | None) -> tuple[tuple[float, float], bool]:
        """Advance one tick.  ``a2=None`` lets the scripted partner drive player 2."""
        raise NotImplementedError

    def ram(self) -> np.ndarray:
        raise NotImplementedError


class DuelPong(Game):
    """Competitive paddle duel; first to five points ends the episode.

    Layout: [0] p1_y, [1] p1 score, [2] p1 last action, [3] p2_y, [4] p2 score,
    [5] p2 last action, [6] ball_x, [7] ball_y, [8] vx+128, [9] vy+128,
    [10] tick mod 256, [11] ball held for serve.
    """

    name = "duelpong"
    n_actions = 4
    NOOP, UP, DOWN, FIRE = range(4)
    annotation = ((0, 3), (1, 4), (2, 5))

    WIDTH, HEIGHT = 160, 192
    PADDLE_H = 24
    P1_COL, P2_COL = 8, 151
    PADDLE_SPEED = 4
    TRACKER_SPEED = 3
    Y_MAX = HEIGHT - PADDLE_H
    SERVE_HOLD = 20
    WIN_SCORE = 5

    def reset(self, rng):
        self.rng = rng
        self.p1_y = self.p2_y = self.Y_MAX // 2
        self.s1 = self.s2 = 0
        self.last1 = self.last2 = self.NOOP
        self.tick_count = 0
        self._serve(int(rng.integers(1, 3)))

    def _serve(self, server: int) -> None:
        self.server = server
        self.serving = True
        self.hold = 0
        self.bx, self.by = self.WIDTH // 2, self.HEIGHT // 2
        # the ball is released toward the server, who just conceded the point
        self.vx = -2 if server == 1 else 2
        self.vy = int(self.rng.choice((-2, -1, 1, 2)))

    def _move(self, y: int, action: int) -> int:
        if action == self.UP:
            y -= self.PADDLE_SPEED
        elif action == self.DOWN:
            y += self.PADDLE_SPEED
        return min(max(y, 0), self.Y_MAX)

    def _track(self) -> int:
        # the paddle's own y byte chases ball_y
        if self.p2_y < self.by:
            self.p2_y = min(self.p2_y + self.TRACKER_SPEED, self.Y_MAX)
            return self.DOWN
        if self.p2_y > self.by:
            self.p2_y = max(self.p2_y - self.TRACKER_SPEED, 0)
            return self.UP
        return self.NOOP

    def _deflect(self, rel: int) -> int:
        if rel < 8:
            return -2
        if rel < 16:
            return 1 if self.vy > 0 else -1
        return 2

    def tick(self, a1, a2):
        self.p1_y = self._move(self.p1_y, a1)
        self.last1 = a1
        if a2 is None:
            self.last2 = self._track()
            fire2 = False
        else:
            self.p2_y = self._move(self.p2_y, a2)
            self.last2 = a2
            fire2 = a2 == self.FIRE
        r1 = r2 = 0.0

        if self.serving:
            fired = (a1 == self.FIRE) if self.server == 1 else fire2
            if fired or self.hold >= self.SERVE_HOLD:
                self.serving = False
            else:
                self.hold += 1
        if not self.serving:
            nx, ny = self.bx + self.vx, self.by + self.vy
            if ny < 0:
                ny, self.vy = -ny, -self.vy
            elif ny > self.HEIGHT - 1:
                ny, self.vy = 2 * (self.HEIGHT - 1) - ny, -self.vy
            if self.vx < 0 and self.bx > self.P1_COL >= nx and self.p1_y <= ny < self.p1_y + self.PADDLE_H:
                nx, self.vx = 2 * self.P1_COL - nx, 2
                self.vy = self._deflect(ny - self.p1_y)
            elif self.vx > 0 and self.bx < self.P2_COL <= nx and self.p2_y <= ny < self.p2_y + self.PADDLE_H:
                nx, self.vx = 2 * self.P2_COL - nx, -2
                self.vy = self._deflect(ny - self.p2_y)
            self.bx, self.by = nx, ny
            if self.bx < 0:
                self.s2 += 1
                r1, r2 = -1.0, 1.0
                self._serve(1)
            elif self.bx > self.WIDTH - 1:
                self.s1 += 1
                r1, r2 = 1.0, -1.0
                self._serve(2)

        self.tick_count += 1
        return (r1, r2), (self.s1 >= self.WIN_SCORE or self.s2 >= self.WIN_SCORE)

    def ram(self):
        ram = np.zeros(RAM_SIZE, dtype=np.uint8)
        ram[:12] = (
            self.p1_y, self.s1, self.last1, self.p2_y, self.s2, self.last2,
            self.bx, self.by, self.vx + 128, self.vy + 128, self.tick_count % 256, int(self.serving),
        )
        return ram


class CoopCatch(Game):
    """Cooperative catching; three shared misses end the episode.

    Layout: [0] p1_x, [1] p2_x, [2] obj_x, [3] obj_y, [4] score mod 256,
    [5] misses, [6] tick mod 256.
    """

    name = "coopcatch"
    n_actions = 3
    NOOP, LEFT, RIGHT = range(3)
    annotation = ((0, 1),)

    WIDTH = 160
    CATCHER_W = 16
    X_MAX = WIDTH - CATCHER_W
    SPEED = 4
    TRACKER_SPEED = 3
    FALL = 2
    CATCH_ROW = 184
    MAX_MISSES = 3

    def reset(self, rng):
        self.rng = rng
        self.p1_x, self.p2_x = 36, 108
        self.score = 0
        self.misses = 0
        self.tick_count = 0
        self._spawn()

    def _spawn(self) -> None:
        self.obj_x = int(self.rng.integers(0, self.WIDTH))
        self.obj_y = 0

    def _move(self, x: int, action: int) -> int:
        if action == self.LEFT:
            x -= self.SPEED
        elif action == self.RIGHT:
            x += self.SPEED
        return min(max(x, 0), self.X_MAX)

    def _track(self) -> None:
        centre = self.p2_x + self.CATCHER_W // 2
        if centre < self.obj_x:
            self.p2_x = min(self.p2_x + self.TRACKER_SPEED, self.X_MAX)
        elif centre > self.obj_x:
            self.p2_x = max(self.p2_x - self.TRACKER_SPEED, 0)

    def _over(self, x: int) -> bool:
        return x <= self.obj_x < x + self.CATCHER_W

    def tick(self, a1, a2):
        self.p1_x = self._move(self.p1_x, a1)
        if a2 is None:
            self._track()
        else:
            self.p2_x = self._move(self.p2_x, a2)
        reward = 0.0
        self.obj_y += self.FALL
        if self.obj_y >= self.CATCH_ROW:
            if self._over(self.p1_x) or self._over(self.p2_x):
                self.score += 1
                reward = 1.0
            else:
                self.misses += 1
            if self.misses < self.MAX_MISSES:
                self._spawn()
        self.tick_count += 1
        return (reward, reward), self.misses >= self.MAX_MISSES

    def ram(self):
        ram = np.zeros(RAM_SIZE, dtype=np.uint8)
        ram[:7] = (
            self.p1_x, self.p2_x, self.obj_x, self.obj_y,
            self.score % 256, self.misses, self.tick_count % 256,
        )
        return ram


GAMES = {"duelpong": DuelPong, "coopcatch": CoopCatch}


def make_game(game_id: str) -> Game:
    key = game_id.lower().replace("_", "").replace("-", "")
    try:
        return GAMES[key]()
    except KeyError:
        raise ValueError(f"unknown game {game_id!r}; choose from {sorted(GAMES)}") from None
