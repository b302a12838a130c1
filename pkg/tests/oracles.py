"""Independent brute-force oracles used by the tests.

Everything here is deliberately naive (python loops, mpmath extended
precision) and shares no code with the implementation it checks.
"""

import mpmath

mpmath.mp.dps = 50


def naive_maxpool(grid, theta, pad=0.0):
    h = len(grid)
    w = len(grid[0])
    r = theta // 2
    out = [[0.0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            best = float("-inf")
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy, xx = y + dy, x + dx
                    v = grid[yy][xx] if 0 <= yy < h and 0 <= xx < w else pad
                    best = max(best, v)
            out[y][x] = best
    return out


def flood_fill_components(mask, connectivity):
    """Label map + count via BFS flood fill in scan order."""
    h, w = len(mask), len(mask[0])
    if connectivity == 4:
        nbrs = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    else:
        nbrs = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    labels = [[0] * w for _ in range(h)]
    k = 0
    for y in range(h):
        for x in range(w):
            if mask[y][x] and labels[y][x] == 0:
                k += 1
                stack = [(y, x)]
                labels[y][x] = k
                while stack:
                    cy, cx = stack.pop()
                    for dy, dx in nbrs:
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny][nx] and labels[ny][nx] == 0:
                            labels[ny][nx] = k
                            stack.append((ny, nx))
    return labels, k


def bresenham(y0, x0, y1, x1):
    """Classic integer line rasterization."""
    points = []
    dy = abs(y1 - y0)
    dx = abs(x1 - x0)
    sy = 1 if y1 >= y0 else -1
    sx = 1 if x1 >= x0 else -1
    err = dx - dy
    y, x = y0, x0
    while True:
        points.append((y, x))
        if (y, x) == (y1, x1):
            break
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy
    return points


def _clamp(p, eps):
    eps = mpmath.mpf(eps)
    return min(max(mpmath.mpf(p), eps), 1 - eps)


def oracle_bce(pred, gt, eps=1e-7):
    total = mpmath.mpf(0)
    n = 0
    for row_p, row_g in zip(pred, gt):
        for p, y in zip(row_p, row_g):
            pc = _clamp(p, eps)
            total += -(mpmath.log(pc) if y else mpmath.log(1 - pc))
            n += 1
    return float(total / n)


def oracle_dice(pred, gt, eps=1e-7):
    num = mpmath.mpf(0)
    den = mpmath.mpf(0)
    for row_p, row_g in zip(pred, gt):
        for p, y in zip(row_p, row_g):
            pc = _clamp(p, eps)
            num += 2 * pc * (1 if y else 0)
            den += pc + (1 if y else 0)
    return float(1 - (num + 1) / (den + 1))


def oracle_focal(pred, gt, gamma, eps=1e-7):
    total = mpmath.mpf(0)
    for row_p, row_g in zip(pred, gt):
        for p, y in zip(row_p, row_g):
            pc = _clamp(p, eps)
            pt = pc if y else 1 - pc
            total += -((1 - pt) ** mpmath.mpf(gamma)) * mpmath.log(pt)
    return float(total)


def oracle_afl(pred, gt, gamma, alpha, eps=1e-7):
    """Returns (gamma_a, loss)."""
    fg_sum = mpmath.mpf(0)
    fg_count = 0
    for row_p, row_g in zip(pred, gt):
        for p, y in zip(row_p, row_g):
            if y:
                fg_sum += _clamp(p, eps)
                fg_count += 1
    gamma_a = 1 - fg_sum / fg_count if fg_count else mpmath.mpf(0)
    e = mpmath.mpf(gamma) + gamma_a
    total = mpmath.mpf(0)
    for row_p, row_g in zip(pred, gt):
        for p, y in zip(row_p, row_g):
            pc = _clamp(p, eps)
            pt = pc if y else 1 - pc
            total += -((1 - pt) ** e) * mpmath.log(pt) + mpmath.mpf(alpha) * (1 - pt) ** (e + 1)
    return float(gamma_a), float(total)


def oracle_boundary_loss(pred, gt, theta1, theta2):
    """Precision/recall/BF1/loss via naive pooling on python lists."""
    h, w = len(pred), len(pred[0])
    inv_p = [[1.0 - pred[y][x] for x in range(w)] for y in range(h)]
    inv_g = [[0.0 if gt[y][x] else 1.0 for x in range(w)] for y in range(h)]
    bp = naive_maxpool(inv_p, theta1, pad=1.0)
    bg = naive_maxpool(inv_g, theta1, pad=1.0)
    b_pd = [[bp[y][x] - inv_p[y][x] for x in range(w)] for y in range(h)]
    b_gt = [[bg[y][x] - inv_g[y][x] for x in range(w)] for y in range(h)]
    ext_pd = naive_maxpool(b_pd, theta2, pad=0.0)
    ext_gt = naive_maxpool(b_gt, theta2, pad=0.0)
    sum_pd = sum(map(sum, b_pd))
    sum_gt = sum(map(sum, b_gt))
    num_p = sum(b_pd[y][x] * ext_gt[y][x] for y in range(h) for x in range(w))
    num_r = sum(b_gt[y][x] * ext_pd[y][x] for y in range(h) for x in range(w))
    precision = num_p / sum_pd if sum_pd > 0 else 0.0
    recall = num_r / sum_gt if sum_gt > 0 else 0.0
    bf1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, bf1, 1.0 - bf1
