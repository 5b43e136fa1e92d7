#include "twoscale/mesh.hpp"
#include "twoscale/delaunay.hpp"
#include "twoscale/error.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

namespace twoscale {

namespace {

constexpr double kPi = std::numbers::pi;

// Closest point on the ellipse (x/e0)² + (y/e1)² = 1 to (y0, y1) with e0 >= e1 and y0, y1 >= 0.
Vec2 ellipse_closest_quadrant(double e0, double e1, double y0, double y1) {
    if (y1 > 0.0) {
        if (y0 > 0.0) {
            const double z0 = y0 / e0, z1 = y1 / e1;
            const double r0 = (e0 / e1) * (e0 / e1);
            // Root of G(s) = (r0 z0 / (s + r0))² + (z1 / (s + 1))² - 1 on [z1 - 1, |(r0 z0, z1)| - 1].
            double lo = z1 - 1.0;
            double hi = std::hypot(r0 * z0, z1) - 1.0;
            double s = 0.5 * (lo + hi);
            for (int it = 0; it < 1100; ++it) {
                s = 0.5 * (lo + hi);
                if (s == lo || s == hi) break;
                const double a = r0 * z0 / (s + r0), b = z1 / (s + 1.0);
                const double g = a * a + b * b - 1.0;
                if (g > 0.0)
                    lo = s;
                else if (g < 0.0)
                    hi = s;
                else
                    break;
            }
            return {r0 * y0 / (s + r0), y1 / (s + 1.0)};
        }
        return {0.0, e1};
    }
    const double num = e0 * y0, den = e0 * e0 - e1 * e1;
    if (num < den) {
        const double xde0 = num / den;
        return {e0 * xde0, e1 * std::sqrt(std::max(0.0, 1.0 - xde0 * xde0))};
    }
    return {e0, 0.0};
}

double tri_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

}  // namespace

double Domain::distance(const Vec2& x) const {
    switch (kind) {
        case Kind::Interval:
            return std::min(x.x(), a - x.x());
        case Kind::Disk:
            return a - x.norm();
        case Kind::Ellipse: {
            const Vec2 q = closest_boundary_point(x);
            const double d = (x - q).norm();
            const double level = (x.x() / a) * (x.x() / a) + (x.y() / b) * (x.y() / b);
            return level <= 1.0 ? d : -d;
        }
    }
    return 0.0;
}

Vec2 Domain::closest_boundary_point(const Vec2& x) const {
    switch (kind) {
        case Kind::Interval:
            return {x.x() < 0.5 * a ? 0.0 : a, 0.0};
        case Kind::Disk: {
            const double r = x.norm();
            if (r == 0.0) return {a, 0.0};
            return x * (a / r);
        }
        case Kind::Ellipse: {
            const bool swap = a < b;
            const double e0 = swap ? b : a, e1 = swap ? a : b;
            const double y0 = std::abs(swap ? x.y() : x.x()), y1 = std::abs(swap ? x.x() : x.y());
            Vec2 q = ellipse_closest_quadrant(e0, e1, y0, y1);
            if (swap) q = Vec2(q.y(), q.x());
            return {std::copysign(q.x(), x.x()), std::copysign(q.y(), x.y())};
        }
    }
    return x;
}

Vec2 Domain::outward_normal(const Vec2& p) const {
    switch (kind) {
        case Kind::Interval:
            return {p.x() < 0.5 * a ? -1.0 : 1.0, 0.0};
        case Kind::Disk:
            return p.normalized();
        case Kind::Ellipse:
            return Vec2(p.x() / (a * a), p.y() / (b * b)).normalized();
    }
    return p;
}

std::string Domain::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Interval: os << "interval(" << a << ")"; break;
        case Kind::Disk: os << "disk(" << a << ")"; break;
        case Kind::Ellipse: os << "ellipse(" << a << "," << b << ")"; break;
    }
    return os.str();
}

double Mesh::area() const {
    double s = 0.0;
    for (const auto& c : cells) {
        if (dim == 1)
            s += std::abs(points[c[1]].x() - points[c[0]].x());
        else
            s += tri_area(points[c[0]], points[c[1]], points[c[2]]);
    }
    return s;
}

void recompute_mesh_metrics(Mesh& m) {
    m.h = 0.0;
    m.min_angle_deg = 180.0;
    for (const auto& c : m.cells) {
        if (m.dim == 1) {
            m.h = std::max(m.h, (m.points[c[1]] - m.points[c[0]]).norm());
            continue;
        }
        for (int i = 0; i < 3; ++i) {
            const Vec2& p = m.points[c[i]];
            const Vec2 u = m.points[c[(i + 1) % 3]] - p, v = m.points[c[(i + 2) % 3]] - p;
            m.h = std::max(m.h, u.norm());
            const double cosang = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
            m.min_angle_deg = std::min(m.min_angle_deg, std::acos(cosang) * 180.0 / kPi);
        }
    }
    if (m.dim == 1) m.min_angle_deg = 0.0;
}

Mesh mesh_domain(const Domain& domain, double spacing, double keep) {
    if (domain.kind == Domain::Kind::Interval) {
        return mesh_interval(domain.a, static_cast<int>(std::ceil(domain.a / spacing - 1e-9)));
    }
    if (!(spacing > 0.0) || spacing > domain.min_radius() / 4.0) {
        std::ostringstream os;
        os << "mesh_domain: spacing " << spacing << " exceeds a quarter of the smallest semi-axis";
        throw ConfigError(os.str());
    }
    Mesh m;
    m.dim = 2;
    m.domain = domain;
    m.lattice_spacing = spacing;

    const int ni = static_cast<int>(std::ceil(domain.a / spacing)) + 1;
    const int nj = static_cast<int>(std::ceil(domain.b / spacing)) + 1;
    for (int i = -ni; i <= ni; ++i)
        for (int j = -nj; j <= nj; ++j) {
            const Vec2 p(i * spacing, j * spacing);
            if (domain.distance(p) >= keep * spacing) m.points.push_back(p);
        }
    const int ninterior = static_cast<int>(m.points.size());

    // Boundary vertices at (nearly) uniform arc length.
    if (domain.kind == Domain::Kind::Disk) {
        const int nb = static_cast<int>(std::ceil(2.0 * kPi * domain.a / spacing));
        for (int k = 0; k < nb; ++k) {
            const double t = 2.0 * kPi * k / nb;
            m.points.emplace_back(domain.a * std::cos(t), domain.a * std::sin(t));
        }
    } else {
        const int samples = 1 << 16;
        std::vector<double> arc(samples + 1, 0.0);
        auto speed = [&](double t) { return std::hypot(domain.a * std::sin(t), domain.b * std::cos(t)); };
        const double dt = 2.0 * kPi / samples;
        for (int s = 0; s < samples; ++s) {
            const double t = s * dt;
            arc[s + 1] = arc[s] + dt / 6.0 * (speed(t) + 4.0 * speed(t + 0.5 * dt) + speed(t + dt));
        }
        const double length = arc[samples];
        const int nb = static_cast<int>(std::ceil(length / spacing));
        int s = 0;
        for (int k = 0; k < nb; ++k) {
            const double target = length * k / nb;
            while (s < samples - 1 && arc[s + 1] < target) ++s;
            const double frac = (target - arc[s]) / (arc[s + 1] - arc[s]);
            const double t = (s + frac) * dt;
            m.points.emplace_back(domain.a * std::cos(t), domain.b * std::sin(t));
        }
    }
    m.boundary.assign(m.points.size(), 0);
    for (std::size_t i = ninterior; i < m.points.size(); ++i) m.boundary[i] = 1;

    m.cells = delaunay_triangulate(m.points);

    // Boundary edges: edges used by exactly one triangle, oriented with the interior on the left.
    std::map<std::pair<int, int>, int> count;
    for (const auto& c : m.cells)
        for (int i = 0; i < 3; ++i) {
            const int u = c[i], v = c[(i + 1) % 3];
            ++count[{std::min(u, v), std::max(u, v)}];
        }
    std::vector<int> next(m.points.size(), -1);
    int nedges = 0;
    for (const auto& c : m.cells)
        for (int i = 0; i < 3; ++i) {
            const int u = c[i], v = c[(i + 1) % 3];
            if (count[{std::min(u, v), std::max(u, v)}] != 1) continue;
            if (!m.boundary[u] || !m.boundary[v]) {
                std::ostringstream os;
                os << "mesh_domain: interior vertex on the hull near (" << m.points[u].x() << ", " << m.points[u].y() << ")";
                throw Error(os.str());
            }
            next[u] = v;
            ++nedges;
        }
    const int start = ninterior;
    int u = start;
    do {
        const int v = next[u];
        if (v < 0) throw Error("mesh_domain: boundary loop is broken");
        m.boundary_edges.push_back({u, v});
        u = v;
    } while (u != start && static_cast<int>(m.boundary_edges.size()) <= nedges);
    if (static_cast<int>(m.boundary_edges.size()) != nedges) throw Error("mesh_domain: boundary is not a single loop");

    m.normals.assign(m.points.size(), Vec2::Zero());
    for (std::size_t i = 0; i < m.points.size(); ++i)
        if (m.boundary[i]) m.normals[i] = domain.outward_normal(m.points[i]);

    recompute_mesh_metrics(m);
    if (m.min_angle_deg < 20.0) {
        Vec2 worst = Vec2::Zero();
        double wa = 180.0;
        for (const auto& c : m.cells)
            for (int i = 0; i < 3; ++i) {
                const Vec2 a = m.points[c[(i + 1) % 3]] - m.points[c[i]], b = m.points[c[(i + 2) % 3]] - m.points[c[i]];
                const double ang = std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0)) * 180.0 / kPi;
                if (ang < wa) {
                    wa = ang;
                    worst = (m.points[c[0]] + m.points[c[1]] + m.points[c[2]]) / 3.0;
                }
            }
        std::ostringstream os;
        os << "mesh_domain: minimum angle " << wa << " deg below 20 near (" << worst.x() << ", " << worst.y() << ")";
        throw Error(os.str());
    }
    return m;
}

Mesh mesh_interval(double length, int cells) {
    if (cells < 2) throw ConfigError("mesh_interval needs at least two cells");
    Mesh m;
    m.dim = 1;
    m.domain = Domain::interval(length);
    for (int i = 0; i <= cells; ++i) m.points.emplace_back(length * i / cells, 0.0);
    for (int i = 0; i < cells; ++i) m.cells.push_back({i, i + 1, -1});
    m.boundary.assign(cells + 1, 0);
    m.boundary[0] = m.boundary[cells] = 1;
    m.normals.assign(cells + 1, Vec2::Zero());
    m.normals[0] = Vec2(-1.0, 0.0);
    m.normals[cells] = Vec2(1.0, 0.0);
    m.lattice_spacing = length / cells;
    recompute_mesh_metrics(m);
    return m;
}

void write_mesh(const Mesh& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write mesh file " + path);
    out << std::setprecision(17);
    const char* kind = m.domain.kind == Domain::Kind::Disk ? "disk"
                       : m.domain.kind == Domain::Kind::Ellipse ? "ellipse"
                                                                 : "interval";
    out << "twoscale-mesh 1\n";
    out << "domain " << kind << " " << m.domain.a << " " << m.domain.b << "\n";
    out << "lattice " << m.lattice_spacing << "\n";
    out << "vertices " << m.points.size() << "\n";
    for (const auto& p : m.points) out << p.x() << " " << p.y() << "\n";
    out << "cells " << m.cells.size() << "\n";
    for (const auto& c : m.cells) out << c[0] << " " << c[1] << " " << c[2] << "\n";
    out << "boundary " << m.boundary.size() << "\n";
    for (char b : m.boundary) out << int(b) << "\n";
}

Mesh read_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read mesh file " + path);
    auto expect = [&](const std::string& word) {
        std::string w;
        in >> w;
        if (w != word) throw Error("mesh file " + path + ": expected '" + word + "', found '" + w + "'");
    };
    int version = 0;
    expect("twoscale-mesh");
    in >> version;
    if (version != 1) throw Error("mesh file " + path + ": unsupported version");
    Mesh m;
    std::string kind;
    expect("domain");
    in >> kind >> m.domain.a >> m.domain.b;
    if (kind == "disk")
        m.domain.kind = Domain::Kind::Disk;
    else if (kind == "ellipse")
        m.domain.kind = Domain::Kind::Ellipse;
    else if (kind == "interval")
        m.domain.kind = Domain::Kind::Interval;
    else
        throw Error("mesh file " + path + ": unknown domain '" + kind + "'");
    m.dim = m.domain.dim();
    expect("lattice");
    in >> m.lattice_spacing;
    std::size_t n = 0;
    expect("vertices");
    in >> n;
    m.points.resize(n);
    for (auto& p : m.points) in >> p.x() >> p.y();
    expect("cells");
    in >> n;
    m.cells.resize(n);
    for (auto& c : m.cells) in >> c[0] >> c[1] >> c[2];
    expect("boundary");
    in >> n;
    m.boundary.resize(n);
    for (auto& b : m.boundary) {
        int v;
        in >> v;
        b = static_cast<char>(v);
    }
    if (!in) throw Error("mesh file " + path + " is truncated");
    m.normals.assign(m.points.size(), Vec2::Zero());
    for (std::size_t i = 0; i < m.points.size(); ++i)
        if (m.boundary[i]) m.normals[i] = m.domain.outward_normal(m.points[i]);
    if (m.dim == 2) {
        std::map<std::pair<int, int>, int> count;
        for (const auto& c : m.cells)
            for (int i = 0; i < 3; ++i) ++count[{std::min(c[i], c[(i + 1) % 3]), std::max(c[i], c[(i + 1) % 3])}];
        for (const auto& c : m.cells)
            for (int i = 0; i < 3; ++i) {
                const int u = c[i], v = c[(i + 1) % 3];
                if (count[{std::min(u, v), std::max(u, v)}] == 1) m.boundary_edges.push_back({u, v});
            }
    }
    recompute_mesh_metrics(m);
    return m;
}

void write_field(const Mesh& m, const Eigen::VectorXd& values, const std::string& path) {
    if (values.size() != m.num_vertices()) throw Error("write_field: field size does not match mesh");
    std::ofstream out(path);
    if (!out) throw Error("cannot write field file " + path);
    out << std::setprecision(17) << "twoscale-field " << values.size() << "\n";
    for (int i = 0; i < m.num_vertices(); ++i)
        out << m.points[i].x() << " " << m.points[i].y() << " " << values[i] << "\n";
}

}  // namespace twoscale
