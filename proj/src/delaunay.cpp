#include "twoscale/delaunay.hpp"
#include "twoscale/error.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>

namespace twoscale {

namespace {

using Vec2 = Eigen::Vector2d;

struct Tri {
    std::array<int, 3> v;
    std::array<int, 3> nb;  // nb[i] is across the edge opposite v[i]
    bool alive;
};

double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// Positive when d lies inside the circumcircle of the counter-clockwise triangle abc.
double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double adx = a.x() - d.x(), ady = a.y() - d.y();
    const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
    const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
    const double ad = adx * adx + ady * ady, bd = bdx * bdx + bdy * bdy, cd = cdx * cdx + cdy * cdy;
    return ad * (bdx * cdy - cdx * bdy) + bd * (cdx * ady - adx * cdy) + cd * (adx * bdy - bdx * ady);
}

std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, int order) {
    std::uint64_t d = 0;
    for (std::uint32_t s = 1u << (order - 1); s > 0; s >>= 1) {
        const std::uint32_t rx = (x & s) ? 1u : 0u;
        const std::uint32_t ry = (y & s) ? 1u : 0u;
        d += static_cast<std::uint64_t>(s) * s * ((3u * rx) ^ ry);
        if (ry == 0) {
            if (rx == 1) {
                x = s - 1 - (x & (s - 1)) + (x & ~(s - 1));
                y = s - 1 - (y & (s - 1)) + (y & ~(s - 1));
                x &= (s << 1) - 1;
                y &= (s << 1) - 1;
            }
            std::swap(x, y);
        }
    }
    return d;
}

class Triangulator {
public:
    explicit Triangulator(std::vector<Vec2> pts) : p_(std::move(pts)) {}

    std::vector<std::array<int, 3>> run(const std::vector<int>& order, int nreal) {
        Vec2 lo = p_[0], hi = p_[0];
        for (int i = 0; i < nreal; ++i) {
            lo = lo.cwiseMin(p_[i]);
            hi = hi.cwiseMax(p_[i]);
        }
        const Vec2 c = 0.5 * (lo + hi);
        const double span = std::max((hi - lo).maxCoeff(), 1e-300);
        const int s0 = static_cast<int>(p_.size());
        p_.push_back(c + Vec2(-60.0 * span, -40.0 * span));
        p_.push_back(c + Vec2(60.0 * span, -40.0 * span));
        p_.push_back(c + Vec2(0.0, 80.0 * span));
        tris_.push_back({{s0, s0 + 1, s0 + 2}, {-1, -1, -1}, true});
        first_.assign(p_.size(), -1);
        stamp_.assign(p_.size(), 0);

        int last = 0;
        for (int idx : order) last = insert(idx, last);

        std::vector<std::array<int, 3>> out;
        for (const Tri& t : tris_) {
            if (!t.alive || t.v[0] >= s0 || t.v[1] >= s0 || t.v[2] >= s0) continue;
            out.push_back(t.v);
        }
        return out;
    }

private:
    std::vector<Vec2> p_;
    std::vector<Tri> tris_;
    std::vector<int> free_;
    std::vector<int> mark_;
    int mark_id_ = 0;
    std::vector<int> first_;  // new triangle whose first vertex is this vertex
    std::vector<int> stamp_;
    int stamp_id_ = 0;

    int locate(const Vec2& q, int start) const {
        int t = start;
        int guard = 0;
        std::size_t limit = 4 * tris_.size() + 16;
        while (true) {
            const Tri& tr = tris_[t];
            int next = -1;
            for (int k = 0; k < 3; ++k) {
                const int i = (k + guard) % 3;
                const Vec2& a = p_[tr.v[(i + 1) % 3]];
                const Vec2& b = p_[tr.v[(i + 2) % 3]];
                // Collinear points give round-off of either sign; treat those as on the edge.
                if (orient(a, b, q) < -1e-13 * (b - a).norm() * (q - a).norm()) {
                    next = tr.nb[i];
                    break;
                }
            }
            if (next < 0) return t;
            t = next;
            if (static_cast<std::size_t>(++guard) > limit) throw Error("delaunay: point location did not terminate");
        }
    }

    int new_tri(const Tri& t) {
        if (!free_.empty()) {
            const int id = free_.back();
            free_.pop_back();
            tris_[id] = t;
            return id;
        }
        tris_.push_back(t);
        return static_cast<int>(tris_.size()) - 1;
    }

    int insert(int pi, int start) {
        const Vec2& q = p_[pi];
        const int t0 = locate(q, tris_[start].alive ? start : first_alive());
        if (mark_.size() < tris_.size()) mark_.resize(tris_.size() + tris_.size() / 2 + 16, 0);
        ++mark_id_;
        std::vector<int> bad{t0}, stack{t0};
        mark_[t0] = mark_id_;
        while (!stack.empty()) {
            const int t = stack.back();
            stack.pop_back();
            for (int i = 0; i < 3; ++i) {
                const int n = tris_[t].nb[i];
                if (n < 0 || mark_[n] == mark_id_) continue;
                const Tri& tn = tris_[n];
                if (incircle(p_[tn.v[0]], p_[tn.v[1]], p_[tn.v[2]], q) > 0.0) {
                    mark_[n] = mark_id_;
                    bad.push_back(n);
                    stack.push_back(n);
                }
            }
        }
        // Round-off on (nearly) cocircular points can make the cavity non-star-shaped;
        // shrink it until every boundary edge is visible from q and it stays connected to t0.
        for (bool changed = true; changed;) {
            changed = false;
            for (std::size_t b = 0; b < bad.size(); ++b) {
                const int t = bad[b];
                if (t == t0) continue;
                for (int i = 0; i < 3; ++i) {
                    const int n = tris_[t].nb[i];
                    if (n >= 0 && mark_[n] == mark_id_) continue;
                    if (orient(p_[tris_[t].v[(i + 1) % 3]], p_[tris_[t].v[(i + 2) % 3]], q) <= 0.0) {
                        mark_[t] = 0;
                        changed = true;
                        break;
                    }
                }
            }
            if (!changed) break;
            // Keep only the part still connected to t0.
            const int keep_id = ++mark_id_;
            std::vector<int> kept{t0}, st{t0};
            const int old_id = keep_id - 1;
            auto was_bad = [&](int t) { return mark_[t] == old_id; };
            mark_[t0] = keep_id;
            while (!st.empty()) {
                const int t = st.back();
                st.pop_back();
                for (int i = 0; i < 3; ++i) {
                    const int n = tris_[t].nb[i];
                    if (n < 0 || !was_bad(n)) continue;
                    mark_[n] = keep_id;
                    kept.push_back(n);
                    st.push_back(n);
                }
            }
            for (int t : bad)
                if (mark_[t] == old_id) mark_[t] = 0;
            bad.swap(kept);
        }
        struct Edge {
            int a, b, outside, old;
        };
        std::vector<Edge> edges;
        for (int t : bad) {
            for (int i = 0; i < 3; ++i) {
                const int n = tris_[t].nb[i];
                if (n >= 0 && mark_[n] == mark_id_) continue;
                edges.push_back({tris_[t].v[(i + 1) % 3], tris_[t].v[(i + 2) % 3], n, t});
            }
        }
        for (int t : bad) {
            tris_[t].alive = false;
            free_.push_back(t);
        }
        ++stamp_id_;
        std::vector<int> created;
        created.reserve(edges.size());
        for (const Edge& e : edges) {
            if (orient(p_[e.a], p_[e.b], q) <= 0.0) throw Error("delaunay: degenerate cavity (duplicate or collinear point)");
            const int id = new_tri({{e.a, e.b, pi}, {-1, -1, e.outside}, true});
            if (mark_.size() < tris_.size()) mark_.resize(tris_.size() + tris_.size() / 2 + 16, 0);
            created.push_back(id);
            first_[e.a] = id;
            stamp_[e.a] = stamp_id_;
            if (e.outside >= 0) {
                Tri& o = tris_[e.outside];
                for (int j = 0; j < 3; ++j)
                    if (o.nb[j] == e.old && o.v[j] != e.a && o.v[j] != e.b) o.nb[j] = id;
            }
        }
        for (int id : created) {
            Tri& t = tris_[id];
            const int a = t.v[0], b = t.v[1];
            // Across edge (b, p): the new triangle that starts at b.
            if (stamp_[b] != stamp_id_) throw Error("delaunay: cavity boundary is not a closed loop");
            t.nb[0] = first_[b];
            tris_[first_[b]].nb[1] = id;
            (void)a;
        }
        return created.back();
    }

    int first_alive() const {
        for (std::size_t i = 0; i < tris_.size(); ++i)
            if (tris_[i].alive) return static_cast<int>(i);
        throw Error("delaunay: empty triangulation");
    }
};

}  // namespace

std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2>& points, double shear) {
    const int n = static_cast<int>(points.size());
    if (n < 3) throw Error("delaunay: need at least three points");
    std::vector<Vec2> sheared(points.size());
    for (int i = 0; i < n; ++i) sheared[i] = Vec2(points[i].x() + shear * points[i].y(), points[i].y());

    Vec2 lo = sheared[0], hi = sheared[0];
    for (const auto& p : sheared) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double span = std::max((hi - lo).maxCoeff(), 1e-300);
    constexpr int kOrder = 16;
    const double cells = static_cast<double>((1u << kOrder) - 1);
    std::vector<std::uint64_t> key(n);
    for (int i = 0; i < n; ++i) {
        const auto x = static_cast<std::uint32_t>((sheared[i].x() - lo.x()) / span * cells);
        const auto y = static_cast<std::uint32_t>((sheared[i].y() - lo.y()) / span * cells);
        key[i] = hilbert_index(x, y, kOrder);
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key[a] < key[b]; });

    Triangulator tr(std::move(sheared));
    auto tris = tr.run(order, n);
    for (auto& t : tris) {
        if (orient(points[t[0]], points[t[1]], points[t[2]]) < 0.0) std::swap(t[1], t[2]);
    }
    return tris;
}

}  // namespace twoscale
