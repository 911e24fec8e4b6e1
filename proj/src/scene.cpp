#include "seastereo/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "seastereo/error.hpp"
#include "seastereo/rng.hpp"

namespace seastereo {

namespace {

double lattice_value(uint64_t seed, int64_t ix, int64_t iy, int64_t iz) {
    uint64_t h = splitmix64(seed ^ splitmix64(uint64_t(ix) * 0x8da6b343ULL ^
                                              uint64_t(iy) * 0xd8163841ULL ^
                                              uint64_t(iz) * 0xcb1ab31fULL));
    return double(h >> 11) * 0x1.0p-53;
}

double quintic(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

double value_noise(uint64_t seed, const Vec3& p) {
    double fx = std::floor(p.x), fy = std::floor(p.y), fz = std::floor(p.z);
    int64_t ix = int64_t(fx), iy = int64_t(fy), iz = int64_t(fz);
    double tx = quintic(p.x - fx), ty = quintic(p.y - fy), tz = quintic(p.z - fz);
    double acc = 0;
    for (int dz = 0; dz <= 1; ++dz)
        for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
                double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
                acc += w * lattice_value(seed, ix + dx, iy + dy, iz + dz);
            }
    return acc;
}

}  // namespace

Rgb TextureDesc::eval(const Vec3& p) const {
    switch (kind) {
        case TextureKind::Solid:
            return color_a;
        case TextureKind::Checker: {
            double s = std::sin(M_PI * p.x / cell) * std::sin(M_PI * p.y / cell) *
                       std::sin(M_PI * p.z / cell);
            double m = 0.5 + 0.5 * std::tanh(sharpness * 4.0 * s);
            return mix(color_a, color_b, m);
        }
        case TextureKind::Noise: {
            double amp = 1.0, freq = 1.0, acc = 0.0, total = 0.0;
            for (int o = 0; o < octaves; ++o) {
                acc += amp * value_noise(seed + uint64_t(o) * 1013ULL,
                                         Vec3{p.x, p.y, p.z} * (freq / cell));
                total += amp;
                amp *= 0.5;
                freq *= 2.0;
            }
            return mix(color_a, color_b, acc / total);
        }
    }
    return color_a;
}

void SceneObject::validate() const {
    auto check01 = [](const Rgb& c) {
        return c.r >= 0 && c.r <= 1 && c.g >= 0 && c.g <= 1 && c.b >= 0 && c.b <= 1;
    };
    if (!check01(albedo.color_a) || !check01(albedo.color_b))
        raise(ErrorCode::Data, "scene object: albedo channels must be in [0,1]");
    switch (shape) {
        case ShapeKind::Sphere:
            if (radius <= 0) raise(ErrorCode::Data, "sphere: radius must be positive");
            break;
        case ShapeKind::Box:
            if (!(bmax.x > bmin.x && bmax.y > bmin.y && bmax.z > bmin.z))
                raise(ErrorCode::Data, "box: bmax must exceed bmin on every axis");
            break;
        case ShapeKind::Triangle: {
            Vec3 n = cross(v1 - v0, v2 - v0);
            if (norm(n) <= 0) raise(ErrorCode::Data, "triangle: degenerate vertices");
            break;
        }
    }
}

namespace {

bool hit_sphere(const SceneObject& s, const Vec3& o, const Vec3& d, double t_min,
                double t_max, double* t_out, Vec3* n_out) {
    Vec3 oc = o - s.center;
    double a = dot(d, d);
    double b = 2.0 * dot(oc, d);
    double c = dot(oc, oc) - s.radius * s.radius;
    double disc = b * b - 4 * a * c;
    if (disc < 0) return false;
    double sq = std::sqrt(disc);
    double t = (-b - sq) / (2 * a);
    if (t <= t_min) t = (-b + sq) / (2 * a);
    if (t <= t_min || t >= t_max) return false;
    *t_out = t;
    Vec3 p = o + d * t;
    *n_out = (p - s.center) / s.radius;
    return true;
}

bool hit_box(const SceneObject& s, const Vec3& o, const Vec3& d, double t_min,
             double t_max, double* t_out, Vec3* n_out) {
    double t0 = t_min, t1 = t_max;
    int axis = -1;
    double sign = 1.0;
    const double omin[3] = {s.bmin.x, s.bmin.y, s.bmin.z};
    const double omax[3] = {s.bmax.x, s.bmax.y, s.bmax.z};
    const double oo[3] = {o.x, o.y, o.z};
    const double dd[3] = {d.x, d.y, d.z};
    for (int i = 0; i < 3; ++i) {
        double inv = 1.0 / dd[i];
        double ta = (omin[i] - oo[i]) * inv;
        double tb = (omax[i] - oo[i]) * inv;
        double sgn = -1.0;
        if (ta > tb) {
            std::swap(ta, tb);
            sgn = 1.0;
        }
        if (ta > t0) {
            t0 = ta;
            axis = i;
            sign = sgn;
        }
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    if (axis < 0) return false;  // origin inside the box: treat as miss
    *t_out = t0;
    Vec3 n{0, 0, 0};
    if (axis == 0) n.x = sign;
    if (axis == 1) n.y = sign;
    if (axis == 2) n.z = sign;
    *n_out = n;
    return true;
}

bool hit_triangle(const SceneObject& s, const Vec3& o, const Vec3& d, double t_min,
                  double t_max, double* t_out, Vec3* n_out) {
    const double eps = 1e-12;
    Vec3 e1 = s.v1 - s.v0, e2 = s.v2 - s.v0;
    Vec3 pv = cross(d, e2);
    double det = dot(e1, pv);
    if (std::abs(det) < eps) return false;
    double inv = 1.0 / det;
    Vec3 tv = o - s.v0;
    double u = dot(tv, pv) * inv;
    if (u < 0 || u > 1) return false;
    Vec3 qv = cross(tv, e1);
    double v = dot(d, qv) * inv;
    if (v < 0 || u + v > 1) return false;
    double t = dot(e2, qv) * inv;
    if (t <= t_min || t >= t_max) return false;
    *t_out = t;
    *n_out = normalized(cross(e1, e2));
    return true;
}

}  // namespace

bool Scene::raycast(const Vec3& origin, const Vec3& dir, double t_min, double t_max,
                    RayHit* hit) const {
    double best = t_max;
    int best_obj = -1;
    Vec3 best_n;
    for (size_t i = 0; i < objects.size(); ++i) {
        const SceneObject& obj = objects[i];
        double t;
        Vec3 n;
        bool ok = false;
        switch (obj.shape) {
            case ShapeKind::Sphere: ok = hit_sphere(obj, origin, dir, t_min, best, &t, &n); break;
            case ShapeKind::Box: ok = hit_box(obj, origin, dir, t_min, best, &t, &n); break;
            case ShapeKind::Triangle: ok = hit_triangle(obj, origin, dir, t_min, best, &t, &n); break;
        }
        if (ok && t < best) {
            best = t;
            best_obj = int(i);
            best_n = n;
        }
    }
    if (best_obj < 0) return false;
    if (hit) {
        hit->t = best;
        hit->point = origin + dir * best;
        hit->normal = dot(best_n, dir) > 0 ? -best_n : best_n;
        hit->object = best_obj;
    }
    return true;
}

bool Scene::ray_blocked(const Vec3& origin, const Vec3& dir, double t_min,
                        double t_max) const {
    RayHit h;
    return raycast(origin, dir, t_min, t_max, &h);
}

SceneKind parse_scene_kind(const std::string& name) {
    if (name == "coral-like") return SceneKind::CoralLike;
    if (name == "default-like") return SceneKind::DefaultLike;
    if (name == "industry-like") return SceneKind::IndustryLike;
    if (name == "ship-like") return SceneKind::ShipLike;
    raise(ErrorCode::Data, "unknown scene kind: '" + name +
                               "' (expected coral-like, default-like, industry-like "
                               "or ship-like)");
}

std::string scene_kind_name(SceneKind kind) {
    switch (kind) {
        case SceneKind::CoralLike: return "coral-like";
        case SceneKind::DefaultLike: return "default-like";
        case SceneKind::IndustryLike: return "industry-like";
        case SceneKind::ShipLike: return "ship-like";
    }
    return "?";
}

namespace {

Rgb random_palette_color(Rng& rng) {
    // Muted underwater palette: keep channels mid-range, bias toward cyan/ochre.
    double r = rng.uniform(0.15, 0.75);
    double g = rng.uniform(0.20, 0.80);
    double b = rng.uniform(0.25, 0.85);
    return {r, g, b};
}

TextureDesc random_texture(Rng& rng, double cell_lo, double cell_hi, bool high_freq) {
    TextureDesc tex;
    tex.color_a = random_palette_color(rng);
    tex.color_b = random_palette_color(rng);
    tex.cell = rng.uniform(cell_lo, cell_hi);
    tex.seed = rng.next_u64();
    double roll = rng.uniform();
    if (roll < (high_freq ? 0.15 : 0.40)) {
        tex.kind = TextureKind::Solid;
    } else if (roll < 0.60) {
        tex.kind = TextureKind::Checker;
        tex.sharpness = rng.uniform(1.5, 3.5);
    } else {
        tex.kind = TextureKind::Noise;
        tex.octaves = high_freq ? 3 : 2;
    }
    return tex;
}

Vec3 ring_position(Rng& rng, double rho_lo, double rho_hi, double y_lo, double y_hi) {
    double theta = rng.uniform(0, 2 * M_PI);
    double rho = rng.uniform(rho_lo, rho_hi);
    return {rho * std::cos(theta), rng.uniform(y_lo, y_hi), rho * std::sin(theta)};
}

SceneObject make_sphere(const Vec3& c, double r, TextureDesc tex) {
    SceneObject o;
    o.shape = ShapeKind::Sphere;
    o.center = c;
    o.radius = r;
    o.albedo = std::move(tex);
    return o;
}

SceneObject make_box(const Vec3& c, const Vec3& half, TextureDesc tex) {
    SceneObject o;
    o.shape = ShapeKind::Box;
    o.center = c;
    o.bmin = c - half;
    o.bmax = c + half;
    o.albedo = std::move(tex);
    return o;
}

SceneObject make_fin(Rng& rng, const Vec3& base, double size, TextureDesc tex) {
    // Triangle fan element, coral-frond style.
    SceneObject o;
    o.shape = ShapeKind::Triangle;
    o.v0 = base;
    o.v1 = base + Vec3{rng.uniform(-size, size), rng.uniform(0.5 * size, 1.5 * size),
                       rng.uniform(-size, size)};
    o.v2 = base + Vec3{rng.uniform(-size, size), rng.uniform(0.2 * size, size),
                       rng.uniform(-size, size)};
    o.albedo = std::move(tex);
    return o;
}

}  // namespace

Scene build_scene(SceneKind kind, uint64_t seed) {
    Rng rng(derive_seed(seed, "scene:" + scene_kind_name(kind)));
    Scene scene;
    scene.kind = kind;
    scene.seed = seed;
    scene.background = {rng.uniform(0.04, 0.08), rng.uniform(0.08, 0.13),
                        rng.uniform(0.13, 0.20)};

    switch (kind) {
        case SceneKind::DefaultLike: {
            int n = rng.uniform_int(6, 9);
            for (int i = 0; i < n; ++i) {
                Vec3 pos = ring_position(rng, 140, 380, -120, 120);
                TextureDesc tex = random_texture(rng, 28, 70, false);
                if (rng.uniform() < 0.7)
                    scene.objects.push_back(make_sphere(pos, rng.uniform(45, 100), tex));
                else
                    scene.objects.push_back(make_box(
                        pos,
                        Vec3{rng.uniform(35, 85), rng.uniform(35, 85), rng.uniform(35, 85)},
                        tex));
            }
            break;
        }
        case SceneKind::CoralLike: {
            int n = rng.uniform_int(26, 40);
            for (int i = 0; i < n; ++i) {
                Vec3 pos = ring_position(rng, 110, 380, -140, 60);
                TextureDesc tex = random_texture(rng, 7, 16, true);
                double roll = rng.uniform();
                if (roll < 0.55)
                    scene.objects.push_back(make_sphere(pos, rng.uniform(12, 38), tex));
                else if (roll < 0.8)
                    scene.objects.push_back(make_box(
                        pos,
                        Vec3{rng.uniform(8, 30), rng.uniform(12, 40), rng.uniform(8, 30)},
                        tex));
                else
                    scene.objects.push_back(make_fin(rng, pos, rng.uniform(22, 55), tex));
            }
            break;
        }
        case SceneKind::IndustryLike: {
            int n = rng.uniform_int(10, 14);
            for (int i = 0; i < n; ++i) {
                Vec3 pos = ring_position(rng, 150, 420, -130, 130);
                TextureDesc tex = random_texture(rng, 30, 70, false);
                if (rng.uniform() < 0.75) {
                    // Elongated structural member along a random axis.
                    Vec3 half{rng.uniform(15, 45), rng.uniform(15, 45), rng.uniform(15, 45)};
                    int axis = rng.uniform_int(0, 2);
                    double len = rng.uniform(120, 260);
                    if (axis == 0) half.x = len;
                    if (axis == 1) half.y = len * 0.6;
                    if (axis == 2) half.z = len;
                    scene.objects.push_back(make_box(pos, half, tex));
                } else {
                    scene.objects.push_back(make_sphere(pos, rng.uniform(40, 85), tex));
                }
            }
            break;
        }
        case SceneKind::ShipLike: {
            // Hull-like cluster of overlapping boxes.
            Vec3 hull_center = ring_position(rng, 180, 300, -60, 40);
            double heading = rng.uniform(0, 2 * M_PI);
            Vec3 along{std::cos(heading), 0, std::sin(heading)};
            TextureDesc hull_tex = random_texture(rng, 35, 80, false);
            int segments = rng.uniform_int(3, 5);
            double seg_len = rng.uniform(60, 95);
            for (int i = 0; i < segments; ++i) {
                Vec3 c = hull_center + along * ((i - segments / 2.0) * seg_len * 1.6);
                double shrink = 1.0 - 0.18 * std::abs(i - segments / 2.0);
                scene.objects.push_back(make_box(
                    c,
                    Vec3{seg_len * shrink, rng.uniform(35, 65) * shrink,
                         rng.uniform(40, 70) * shrink},
                    hull_tex));
            }
            int debris = rng.uniform_int(8, 12);
            for (int i = 0; i < debris; ++i) {
                Vec3 pos = ring_position(rng, 100, 380, -140, 100);
                TextureDesc tex = random_texture(rng, 14, 40, false);
                if (rng.uniform() < 0.5)
                    scene.objects.push_back(make_sphere(pos, rng.uniform(14, 45), tex));
                else
                    scene.objects.push_back(make_box(
                        pos,
                        Vec3{rng.uniform(12, 40), rng.uniform(12, 40), rng.uniform(12, 40)},
                        tex));
            }
            break;
        }
    }
    for (const auto& obj : scene.objects) obj.validate();
    return scene;
}

Scene build_scene(const std::string& kind_name, uint64_t seed) {
    return build_scene(parse_scene_kind(kind_name), seed);
}

}  // namespace seastereo
