#pragma once

// Straightforward re-implementations used as references in tests. They share
// no code with the library beyond plain data types.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

struct Pixel {
  int r = 0, g = 0, b = 0;
  bool operator==(const Pixel&) const = default;
};

// Row-major grid of pixels addressed by (column, row).
struct Grid {
  int w = 0, h = 0;
  std::vector<Pixel> px;
  Pixel get(int c, int r) const { return px[static_cast<std::size_t>(r * w + c)]; }
};

inline Grid crop_by_index(const Grid& src, int x0, int y0, int w, int h) {
  Grid out{w, h, {}};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) out.px.push_back(src.get(x0 + c, y0 + r));
  }
  return out;
}

struct IntBox {
  long x = 0, y = 0, w = 0, h = 0;
  bool operator==(const IntBox&) const = default;
};

// Tight box by visiting every pixel; w/h of zero means no set pixel.
inline IntBox scan_bbox(const std::vector<std::vector<bool>>& rows) {
  long min_x = -1, min_y = -1, max_x = -1, max_y = -1;
  for (long y = 0; y < static_cast<long>(rows.size()); ++y) {
    for (long x = 0; x < static_cast<long>(rows[y].size()); ++x) {
      if (!rows[y][x]) continue;
      if (min_x < 0 || x < min_x) min_x = x;
      if (min_y < 0 || y < min_y) min_y = y;
      if (x > max_x) max_x = x;
      if (y > max_y) max_y = y;
    }
  }
  if (min_x < 0) return {};
  return {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
}

// Target (i, j) reads source (floor(i*w/tw), floor(j*h/th)).
inline std::vector<std::vector<bool>> nearest_scale(const std::vector<std::vector<bool>>& rows, int tw, int th) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows[0].size());
  std::vector<std::vector<bool>> out(th, std::vector<bool>(tw));
  for (int j = 0; j < th; ++j) {
    for (int i = 0; i < tw; ++i) out[j][i] = rows[(j * h) / th][(i * w) / tw];
  }
  return out;
}

// Area overlap by point sampling at cell midpoints of a uniform grid.
inline double grid_iou(double ax, double ay, double aw, double ah, double bx, double by, double bw, double bh,
                       double step) {
  const double lo_x = std::min(ax, bx), hi_x = std::max(ax + aw, bx + bw);
  const double lo_y = std::min(ay, by), hi_y = std::max(ay + ah, by + bh);
  long in_a = 0, in_b = 0, both = 0;
  for (double y = lo_y + step / 2; y < hi_y; y += step) {
    for (double x = lo_x + step / 2; x < hi_x; x += step) {
      const bool a = x >= ax && x < ax + aw && y >= ay && y < ay + ah;
      const bool b = x >= bx && x < bx + bw && y >= by && y < by + bh;
      in_a += a;
      in_b += b;
      both += a && b;
    }
  }
  const long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

// IoU of integer boxes by counting unit cells.
inline double cell_iou(const IntBox& a, const IntBox& b) {
  long inter = 0;
  for (long y = std::min(a.y, b.y); y < std::max(a.y + a.h, b.y + b.h); ++y) {
    for (long x = std::min(a.x, b.x); x < std::max(a.x + a.w, b.x + b.w); ++x) {
      const bool in_a = x >= a.x && x < a.x + a.w && y >= a.y && y < a.y + a.h;
      const bool in_b = x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
      inter += in_a && in_b;
    }
  }
  const long uni = a.w * a.h + b.w * b.h - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct Box {
  std::string image;
  int cls = 0;
  IntBox box;
  double conf = 1.0;
};

struct Greedy {
  std::vector<bool> ranked_tp;
  int tp = 0, fp = 0, fn = 0;
};

// Sort explicitly by (confidence desc, input index asc); each detection takes
// the free ground truth of its image with highest IoU >= thr, first on ties.
inline Greedy greedy(const std::vector<Box>& dets, const std::vector<Box>& gts, double thr) {
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < dets.size(); ++i) order.push_back({dets[i].conf, i});
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<bool> used(gts.size(), false);
  Greedy out;
  for (const auto& [conf, i] : order) {
    long best = -1;
    double best_v = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].image != dets[i].image) continue;
      const double v = cell_iou(dets[i].box, gts[g].box);
      if (v >= thr && v > best_v) {
        best = static_cast<long>(g);
        best_v = v;
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      ++out.tp;
    } else {
      ++out.fp;
    }
    out.ranked_tp.push_back(best >= 0);
  }
  out.fn = static_cast<int>(gts.size()) - out.tp;
  return out;
}

// 101-point AP: for each recall level, the best precision over every ranked
// prefix that reaches it.
inline std::optional<double> prefix_ap(const std::vector<bool>& ranked_tp, std::size_t num_gt) {
  if (num_gt == 0) return std::nullopt;
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  for (std::size_t k = 1; k <= ranked_tp.size(); ++k) {
    std::size_t tp = 0;
    for (std::size_t i = 0; i < k; ++i) tp += ranked_tp[i];
    points.push_back({static_cast<double>(tp) / static_cast<double>(num_gt),
                      static_cast<double>(tp) / static_cast<double>(k)});
  }
  double sum = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double level = i / 100.0;
    double best = 0.0;
    for (const auto& [rec, prec] : points) {
      if (rec >= level) best = std::max(best, prec);
    }
    sum += best;
  }
  return sum / 101.0;
}

struct Report {
  std::optional<double> map, map50, precision, recall;
};

inline Report evaluate(const std::vector<Box>& dets, const std::vector<Box>& gts, double conf_thr) {
  static const double kThr[10] = {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  std::set<int> classes;
  for (const auto& b : dets) classes.insert(b.cls);
  for (const auto& b : gts) classes.insert(b.cls);

  double all_sum = 0.0, at50_sum = 0.0;
  int all_n = 0, at50_n = 0, tp = 0, fp = 0, fn = 0;
  for (const int c : classes) {
    std::vector<Box> cd, cg, confident;
    for (const auto& b : dets) {
      if (b.cls == c) cd.push_back(b);
    }
    for (const auto& b : gts) {
      if (b.cls == c) cg.push_back(b);
    }
    for (int t = 0; t < 10; ++t) {
      const auto ap = prefix_ap(greedy(cd, cg, kThr[t]).ranked_tp, cg.size());
      if (!ap) continue;
      all_sum += *ap;
      ++all_n;
      if (t == 0) {
        at50_sum += *ap;
        ++at50_n;
      }
    }
    for (const auto& b : cd) {
      if (b.conf >= conf_thr) confident.push_back(b);
    }
    const auto g = greedy(confident, cg, 0.5);
    tp += g.tp;
    fp += g.fp;
    fn += g.fn;
  }
  Report r;
  if (all_n) r.map = all_sum / all_n;
  if (at50_n) r.map50 = at50_sum / at50_n;
  if (tp + fp) r.precision = static_cast<double>(tp) / (tp + fp);
  if (tp + fn) r.recall = static_cast<double>(tp) / (tp + fn);
  return r;
}

}  // namespace oracle
