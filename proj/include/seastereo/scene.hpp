#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seastereo/vec.hpp"

namespace seastereo {

enum class ShapeKind { Sphere, Box, Triangle };
enum class TextureKind { Solid, Checker, Noise };

// Procedural albedo evaluated at the 3D hit point, so it is view-independent
// by construction. Checker cells are smoothed (tanh of a sine product) to
// stay friendly to subpixel sampling; noise is smooth value noise.
struct TextureDesc {
    TextureKind kind = TextureKind::Solid;
    Rgb color_a{0.5, 0.5, 0.5};
    Rgb color_b{0.2, 0.2, 0.2};
    double cell = 30.0;       // checker cell / noise feature size, scene units
    double sharpness = 3.0;   // checker edge steepness
    int octaves = 2;          // noise octaves
    uint64_t seed = 0;        // noise lattice seed

    Rgb eval(const Vec3& p) const;
};

struct SceneObject {
    ShapeKind shape = ShapeKind::Sphere;
    // Sphere: center+radius. Box: axis-aligned, bmin/bmax. Triangle: v0,v1,v2.
    Vec3 center;
    double radius = 1.0;
    Vec3 bmin, bmax;
    Vec3 v0, v1, v2;
    TextureDesc albedo;

    void validate() const;
};

struct RayHit {
    double t = 0;       // ray parameter; equals perpendicular depth for z=1 rays
    Vec3 point;
    Vec3 normal;        // unit, oriented toward the ray origin
    int object = -1;
};

// One of {coral-like, default-like, industry-like, ship-like}.
enum class SceneKind { CoralLike, DefaultLike, IndustryLike, ShipLike };

SceneKind parse_scene_kind(const std::string& name);
std::string scene_kind_name(SceneKind kind);

struct Scene {
    SceneKind kind = SceneKind::DefaultLike;
    uint64_t seed = 0;
    std::vector<SceneObject> objects;
    Rgb background{0.06, 0.10, 0.16};  // open-water base color

    // Nearest intersection with t in (t_min, t_max); false if none.
    bool raycast(const Vec3& origin, const Vec3& dir, double t_min, double t_max,
                 RayHit* hit) const;
    // Occlusion query: anything with t in (t_min, t_max)?
    bool ray_blocked(const Vec3& origin, const Vec3& dir, double t_min,
                     double t_max) const;
};

// Deterministic for a fixed (kind, seed). Object count, sizes and texture
// complexity follow per-kind distributions: coral-like scatters many small
// high-frequency-textured shapes, default-like places a few simple ones,
// industry-like builds large box structures, ship-like one large hull-like
// cluster plus debris.
Scene build_scene(SceneKind kind, uint64_t seed);
Scene build_scene(const std::string& kind_name, uint64_t seed);

}  // namespace seastereo
