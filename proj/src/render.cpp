#include "posevid/render.hpp"

#include <algorithm>
#include <cmath>

#include "posevid/rng.hpp"

namespace posevid {

namespace {

inline uint8_t lerp_u8(uint8_t a, uint8_t b, double t) {
    return uint8_t(std::lround(double(a) + t * (double(b) - double(a))));
}

inline Color lerp_color(Color a, Color b, double t) {
    return {lerp_u8(a.r, b.r, t), lerp_u8(a.g, b.g, t), lerp_u8(a.b, b.b, t)};
}

inline Color shade(Color c, double f) {
    auto s = [&](uint8_t v) { return uint8_t(std::lround(double(v) * f)); };
    return {s(c.r), s(c.g), s(c.b)};
}

inline void put(ImageU8& img, int x, int y, Color c) {
    uint8_t* p = img.px(y, x);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
}

// Fill every pixel whose center lies within `radius` of the segment, coloring
// from the clamped projection parameter t in [0,1].
template <typename ColorFn>
void capsule_fill(ImageU8& img, double x0, double y0, double x1, double y1, double radius,
                  ColorFn color_at) {
    const double minx = std::min(x0, x1) - radius - 1, maxx = std::max(x0, x1) + radius + 1;
    const double miny = std::min(y0, y1) - radius - 1, maxy = std::max(y0, y1) + radius + 1;
    const int px0 = std::max(0, int(std::floor(minx)));
    const int px1 = std::min(img.width - 1, int(std::ceil(maxx)));
    const int py0 = std::max(0, int(std::floor(miny)));
    const int py1 = std::min(img.height - 1, int(std::ceil(maxy)));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    const double r2 = radius * radius;
    for (int py = py0; py <= py1; ++py) {
        for (int px = px0; px <= px1; ++px) {
            const double qx = px + 0.5, qy = py + 0.5;
            double t = 0.0;
            if (len2 > 0.0) {
                t = std::clamp(((qx - x0) * dx + (qy - y0) * dy) / len2, 0.0, 1.0);
            }
            const double ex = qx - (x0 + t * dx), ey = qy - (y0 + t * dy);
            if (ex * ex + ey * ey <= r2) {
                put(img, px, py, color_at(px, py, t));
            }
        }
    }
}

}  // namespace

void draw_disk(ImageU8& img, double cx, double cy, double radius, Color c) {
    capsule_fill(img, cx, cy, cx, cy, radius, [&](int, int, double) { return c; });
}

void draw_capsule(ImageU8& img, double x0, double y0, double x1, double y1, double radius,
                  Color c0, Color c1) {
    capsule_fill(img, x0, y0, x1, y1, radius,
                 [&](int, int, double t) { return lerp_color(c0, c1, t); });
}

void fill_convex_poly(ImageU8& img, const std::vector<Vec2>& pts, Color c) {
    if (pts.size() < 3) return;
    double minx = pts[0].x, maxx = pts[0].x, miny = pts[0].y, maxy = pts[0].y;
    for (const auto& p : pts) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    const int px0 = std::max(0, int(std::floor(minx)));
    const int px1 = std::min(img.width - 1, int(std::ceil(maxx)));
    const int py0 = std::max(0, int(std::floor(miny)));
    const int py1 = std::min(img.height - 1, int(std::ceil(maxy)));
    const size_t n = pts.size();
    for (int py = py0; py <= py1; ++py) {
        for (int px = px0; px <= px1; ++px) {
            const double qx = px + 0.5, qy = py + 0.5;
            bool pos = false, neg = false;
            for (size_t i = 0; i < n; ++i) {
                const Vec2& a = pts[i];
                const Vec2& b = pts[(i + 1) % n];
                const double cr = (b.x - a.x) * (qy - a.y) - (b.y - a.y) * (qx - a.x);
                if (cr > 0) pos = true;
                if (cr < 0) neg = true;
            }
            if (!(pos && neg)) put(img, px, py, c);
        }
    }
}

std::array<Vec2, kNumJoints> joint_pixel_centers(const ArticulatedFigure& fig, int H, int W) {
    auto pos = forward_kinematics(fig);
    std::array<Vec2, kNumJoints> px;
    for (int j = 0; j < kNumJoints; ++j) {
        px[j] = {pos[j].x * W, pos[j].y * H};
    }
    return px;
}

// ---------------------------------------------------------------------------
// skeleton rendering
// ---------------------------------------------------------------------------

namespace {

struct BoneDef {
    int joint;  // bone runs parent(joint) -> joint
    int limb;
    Color color;
};

// Draw order: legs, arms, torso, head, hands.
const BoneDef kSkeletonBones[] = {
    // legs
    {J_L_HIP, LIMB_L_THIGH, {51, 153, 0}},
    {J_L_KNEE, LIMB_L_THIGH, {0, 204, 102}},
    {J_L_ANKLE, LIMB_L_SHIN, {0, 153, 153}},
    {J_R_HIP, LIMB_R_THIGH, {51, 102, 0}},
    {J_R_KNEE, LIMB_R_THIGH, {0, 153, 51}},
    {J_R_ANKLE, LIMB_R_SHIN, {0, 102, 102}},
    // arms
    {J_L_SHOULDER, LIMB_L_UPPER_ARM, {153, 0, 0}},
    {J_L_ELBOW, LIMB_L_UPPER_ARM, {204, 102, 0}},
    {J_L_WRIST, LIMB_L_FOREARM, {255, 204, 0}},
    {J_R_SHOULDER, LIMB_R_UPPER_ARM, {102, 0, 153}},
    {J_R_ELBOW, LIMB_R_UPPER_ARM, {153, 51, 255}},
    {J_R_WRIST, LIMB_R_FOREARM, {204, 153, 255}},
    // torso
    {J_NECK, LIMB_TORSO, {230, 30, 30}},
    // head
    {J_HEAD_TOP, LIMB_HEAD, {255, 0, 170}},
    // hands
    {J_L_PALM, LIMB_L_HAND, {255, 128, 0}},
    {J_L_FINGER0, LIMB_L_HAND, {255, 150, 0}},
    {J_L_FINGER1, LIMB_L_HAND, {255, 170, 0}},
    {J_L_FINGER2, LIMB_L_HAND, {255, 190, 0}},
    {J_L_FINGER3, LIMB_L_HAND, {255, 210, 0}},
    {J_L_FINGER4, LIMB_L_HAND, {255, 230, 0}},
    {J_R_PALM, LIMB_R_HAND, {0, 128, 255}},
    {J_R_FINGER0, LIMB_R_HAND, {0, 150, 255}},
    {J_R_FINGER1, LIMB_R_HAND, {0, 170, 255}},
    {J_R_FINGER2, LIMB_R_HAND, {0, 190, 255}},
    {J_R_FINGER3, LIMB_R_HAND, {0, 210, 255}},
    {J_R_FINGER4, LIMB_R_HAND, {0, 230, 255}},
};

struct JointDot {
    int joint;
    int limb;
    Color color;
};

const JointDot kSkeletonJoints[] = {
    // legs
    {J_L_HIP, LIMB_L_THIGH, {85, 255, 0}},
    {J_L_KNEE, LIMB_L_SHIN, {0, 255, 85}},
    {J_L_ANKLE, LIMB_L_SHIN, {0, 255, 170}},
    {J_R_HIP, LIMB_R_THIGH, {85, 170, 0}},
    {J_R_KNEE, LIMB_R_SHIN, {0, 170, 85}},
    {J_R_ANKLE, LIMB_R_SHIN, {0, 170, 170}},
    // arms
    {J_L_SHOULDER, LIMB_L_UPPER_ARM, {255, 85, 0}},
    {J_L_ELBOW, LIMB_L_FOREARM, {255, 170, 0}},
    {J_L_WRIST, LIMB_L_FOREARM, {255, 255, 0}},
    {J_R_SHOULDER, LIMB_R_UPPER_ARM, {170, 0, 255}},
    {J_R_ELBOW, LIMB_R_FOREARM, {185, 85, 255}},
    {J_R_WRIST, LIMB_R_FOREARM, {200, 170, 255}},
    // torso
    {J_PELVIS, LIMB_TORSO, {255, 255, 85}},
    {J_NECK, LIMB_TORSO, {255, 85, 85}},
    // head
    {J_HEAD_TOP, LIMB_HEAD, {255, 85, 255}},
    // hands
    {J_L_PALM, LIMB_L_HAND, {255, 140, 60}},
    {J_R_PALM, LIMB_R_HAND, {60, 140, 255}},
};

}  // namespace

ImageU8 render_skeleton(const ArticulatedFigure& fig, int H, int W, int skip_limb) {
    ImageU8 img(H, W);
    auto px = joint_pixel_centers(fig, H, W);
    const double bone_r = std::max(1.0, H / 64.0) * 0.5;
    const double joint_r = std::max(1.0, H / 64.0);
    // Per group: bones, then joint disks. The flat bone list already encodes
    // group order; disks for a group follow its last bone.
    auto draw_group = [&](int first, int last_excl) {
        for (int i = first; i < last_excl; ++i) {
            const BoneDef& b = kSkeletonBones[i];
            if (b.limb == skip_limb) continue;
            const int pj = kJointParent[b.joint];
            draw_capsule(img, px[pj].x, px[pj].y, px[b.joint].x, px[b.joint].y, bone_r, b.color,
                         b.color);
        }
    };
    auto draw_dots = [&](std::initializer_list<int> limbs) {
        for (const JointDot& d : kSkeletonJoints) {
            bool in_group = false;
            for (int l : limbs) in_group = in_group || d.limb == l;
            if (!in_group || d.limb == skip_limb) continue;
            draw_disk(img, px[d.joint].x, px[d.joint].y, joint_r, d.color);
        }
    };
    draw_group(0, 6);  // legs
    draw_dots({LIMB_L_THIGH, LIMB_L_SHIN, LIMB_R_THIGH, LIMB_R_SHIN});
    draw_group(6, 12);  // arms
    draw_dots({LIMB_L_UPPER_ARM, LIMB_L_FOREARM, LIMB_R_UPPER_ARM, LIMB_R_FOREARM});
    draw_group(12, 13);  // torso
    draw_dots({LIMB_TORSO});
    draw_group(13, 14);  // head
    draw_dots({LIMB_HEAD});
    draw_group(14, 26);  // hands
    draw_dots({LIMB_L_HAND, LIMB_R_HAND});
    return img;
}

// ---------------------------------------------------------------------------
// surface rendering
// ---------------------------------------------------------------------------

const std::array<std::pair<Color, Color>, kNumLimbs> kSurfacePalette = {{
    /*torso*/ {{40, 60, 220}, {40, 200, 220}},
    /*head*/ {{40, 200, 220}, {230, 60, 230}},
    /*l_upper_arm*/ {{30, 180, 40}, {160, 220, 40}},
    /*l_forearm*/ {{160, 220, 40}, {250, 250, 60}},
    /*l_hand*/ {{250, 250, 60}, {250, 160, 40}},
    /*r_upper_arm*/ {{180, 40, 30}, {220, 120, 40}},
    /*r_forearm*/ {{220, 120, 40}, {250, 200, 80}},
    /*r_hand*/ {{250, 200, 80}, {250, 120, 120}},
    /*l_thigh*/ {{60, 40, 160}, {120, 80, 220}},
    /*l_shin*/ {{120, 80, 220}, {180, 140, 250}},
    /*r_thigh*/ {{140, 20, 90}, {190, 60, 140}},
    /*r_shin*/ {{190, 60, 140}, {240, 120, 190}},
}};

namespace {

struct LimbSeg {
    int limb;
    int ja, jb;      // proximal, distal joints
    double radius;   // normalized units
};

const LimbSeg kSurfaceLimbs[] = {
    {LIMB_TORSO, J_PELVIS, J_NECK, 0.055},
    {LIMB_HEAD, J_NECK, J_HEAD_TOP, 0.050},
    {LIMB_L_UPPER_ARM, J_L_SHOULDER, J_L_ELBOW, 0.028},
    {LIMB_L_FOREARM, J_L_ELBOW, J_L_WRIST, 0.024},
    {LIMB_L_HAND, J_L_WRIST, J_L_PALM, 0.020},
    {LIMB_R_UPPER_ARM, J_R_SHOULDER, J_R_ELBOW, 0.028},
    {LIMB_R_FOREARM, J_R_ELBOW, J_R_WRIST, 0.024},
    {LIMB_R_HAND, J_R_WRIST, J_R_PALM, 0.020},
    {LIMB_L_THIGH, J_L_HIP, J_L_KNEE, 0.034},
    {LIMB_L_SHIN, J_L_KNEE, J_L_ANKLE, 0.030},
    {LIMB_R_THIGH, J_R_HIP, J_R_KNEE, 0.034},
    {LIMB_R_SHIN, J_R_KNEE, J_R_ANKLE, 0.030},
};

}  // namespace

ImageU8 render_surface(const ArticulatedFigure& fig, int H, int W, int skip_limb) {
    ImageU8 img(H, W);
    auto px = joint_pixel_centers(fig, H, W);
    // Painter order: farther limbs first; stable on equal depth.
    std::array<int, kNumLimbs> order;
    for (int i = 0; i < kNumLimbs; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return fig.limb_depth[a] > fig.limb_depth[b];
    });
    for (int limb : order) {
        if (limb == skip_limb) continue;
        for (const LimbSeg& seg : kSurfaceLimbs) {
            if (seg.limb != limb) continue;
            const auto& pal = kSurfacePalette[limb];
            draw_capsule(img, px[seg.ja].x, px[seg.ja].y, px[seg.jb].x, px[seg.jb].y,
                         seg.radius * H, pal.first, pal.second);
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// hands rendering
// ---------------------------------------------------------------------------

int depth_tier(double depth) {
    const double d = std::clamp(depth, 0.0, 1.0);
    return std::min(4, int(std::floor(d * 5.0)));
}

double tier_brightness(int tier) { return 1.0 - 0.18 * tier; }

HandGeometry hand_geometry(const ArticulatedFigure& fig, int H, int W, int which) {
    auto px = joint_pixel_centers(fig, H, W);
    const int wrist = which == 0 ? J_L_WRIST : J_R_WRIST;
    const int palm = which == 0 ? J_L_PALM : J_R_PALM;
    const int finger0 = which == 0 ? J_L_FINGER0 : J_R_FINGER0;
    const Vec2 wp = px[wrist];
    const Vec2 pp = px[palm];
    double hx = pp.x - wp.x, hy = pp.y - wp.y;
    double hl = std::hypot(hx, hy);
    if (hl < 1e-9) {
        hx = 0.0;
        hy = -1.0;
        hl = 1.0;
    }
    hx /= hl;
    hy /= hl;

    // Enforced minimum pixel scale keeps hands legible at 64x64.
    const double pr = std::max(2.2, 0.028 * H);
    const double fw = std::max(1.4, 0.012 * H);
    const double curl = std::clamp(fig.hand_curl[which], 0.0, 1.0);

    HandGeometry g;
    g.palm_depth = std::clamp(fig.hand_depth[which], 0.0, 1.0);
    // Hexagonal palm oriented along the hand direction.
    const double base_ang = std::atan2(hy, hx);
    for (int i = 0; i < 6; ++i) {
        const double a = base_ang + i * (3.14159265358979323846 / 3.0);
        g.palm.push_back({pp.x + pr * std::cos(a), pp.y + pr * std::sin(a)});
    }
    for (int k = 0; k < 5; ++k) {
        const Vec2 tip = px[finger0 + k];
        double fx = tip.x - pp.x, fy = tip.y - pp.y;
        double fl = std::hypot(fx, fy);
        if (fl < 1e-9) {
            fx = hx;
            fy = hy;
            fl = 1.0;
        }
        fx /= fl;
        fy /= fl;
        // Curl folds the finger toward the viewer: projected length shrinks,
        // depth moves one-plus tiers nearer the camera limit.
        const double fl_px = std::max(4.5, fig.bone_len[finger0 + k] * H) * (1.0 - 0.85 * curl);
        const double bx = pp.x + 0.8 * pr * fx, by = pp.y + 0.8 * pr * fy;
        const double ex = bx + fl_px * fx, ey = by + fl_px * fy;
        const double nx = -fy * fw * 0.5, ny = fx * fw * 0.5;
        g.finger[k] = {{bx + nx, by + ny}, {ex + nx, ey + ny}, {ex - nx, ey - ny}, {bx - nx, by - ny}};
        g.finger_depth[k] =
            std::clamp(fig.hand_depth[which] + 0.25 * curl + 0.01 * k, 0.0, 1.0);
    }
    return g;
}

namespace {
const Color kHandBase[2] = {{255, 210, 150}, {150, 210, 255}};
}

ImageU8 render_hands(const ArticulatedFigure& fig, int H, int W, int skip_limb) {
    ImageU8 img(H, W);
    // Farther hand first.
    int first = fig.hand_depth[0] > fig.hand_depth[1] ? 0 : 1;
    for (int which : {first, 1 - first}) {
        const int limb = which == 0 ? LIMB_L_HAND : LIMB_R_HAND;
        if (limb == skip_limb) continue;
        HandGeometry g = hand_geometry(fig, H, W, which);
        fill_convex_poly(img, g.palm, shade(kHandBase[which], tier_brightness(depth_tier(g.palm_depth))));
        for (int k = 0; k < 5; ++k) {
            fill_convex_poly(img, g.finger[k],
                             shade(kHandBase[which], tier_brightness(depth_tier(g.finger_depth[k]))));
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// appearance rendering
// ---------------------------------------------------------------------------

namespace {

const Color kBackgrounds[4] = {{24, 24, 28}, {34, 30, 24}, {22, 32, 30}, {30, 24, 34}};
const Color kGarments[6] = {{200, 60, 50}, {60, 120, 200}, {60, 170, 90},
                            {210, 160, 60}, {150, 80, 190}, {220, 220, 220}};
const Color kPants[4] = {{40, 40, 60}, {80, 60, 40}, {50, 70, 50}, {90, 90, 100}};
const Color kSkins[3] = {{240, 200, 170}, {190, 140, 110}, {140, 100, 80}};

}  // namespace

ImageU8 render_appearance(const ArticulatedFigure& fig, int H, int W) {
    Rng rng(mix_seed(fig.appearance_seed, 0xA99));
    const Color bg = kBackgrounds[rng.uniform_int(4)];
    const Color garment = kGarments[rng.uniform_int(6)];
    const Color garment2 = kGarments[rng.uniform_int(6)];
    const Color pants = kPants[rng.uniform_int(4)];
    const Color skin = kSkins[rng.uniform_int(3)];
    const bool striped = rng.bernoulli(0.5);

    ImageU8 img(H, W);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            put(img, x, y, bg);
        }
    }
    auto px = joint_pixel_centers(fig, H, W);
    std::array<int, kNumLimbs> order;
    for (int i = 0; i < kNumLimbs; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return fig.limb_depth[a] > fig.limb_depth[b];
    });
    for (int limb : order) {
        for (const LimbSeg& seg : kSurfaceLimbs) {
            if (seg.limb != limb) continue;
            Color c = garment;
            if (limb == LIMB_L_THIGH || limb == LIMB_L_SHIN || limb == LIMB_R_THIGH ||
                limb == LIMB_R_SHIN) {
                c = pants;
            } else if (limb == LIMB_HEAD || limb == LIMB_L_HAND || limb == LIMB_R_HAND) {
                c = skin;
            }
            const double x0 = px[seg.ja].x, y0 = px[seg.ja].y;
            const double x1 = px[seg.jb].x, y1 = px[seg.jb].y;
            if (limb == LIMB_TORSO && striped) {
                capsule_fill(img, x0, y0, x1, y1, seg.radius * H, [&](int, int py, double) {
                    return (py / 3) % 2 == 0 ? garment : garment2;
                });
            } else {
                draw_capsule(img, x0, y0, x1, y1, seg.radius * H, c, c);
            }
        }
    }
    // Head disk over the head capsule, then hands on top.
    const Vec2 neck = px[J_NECK], head = px[J_HEAD_TOP];
    draw_disk(img, neck.x + 0.6 * (head.x - neck.x), neck.y + 0.6 * (head.y - neck.y),
              0.055 * H, skin);
    for (int which : {0, 1}) {
        HandGeometry g = hand_geometry(fig, H, W, which);
        fill_convex_poly(img, g.palm, skin);
        for (int k = 0; k < 5; ++k) {
            fill_convex_poly(img, g.finger[k], shade(skin, 0.92));
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// boxes
// ---------------------------------------------------------------------------

namespace {

PixelBox clamp_box(double minx, double miny, double maxx, double maxy, int H, int W) {
    PixelBox b;
    b.x0 = std::max(0, int(std::floor(minx)));
    b.y0 = std::max(0, int(std::floor(miny)));
    b.x1 = std::min(W - 1, int(std::ceil(maxx)));
    b.y1 = std::min(H - 1, int(std::ceil(maxy)));
    if (minx > W - 1 || maxx < 0 || miny > H - 1 || maxy < 0) {
        b.x1 = b.x0 - 1;  // empty
    }
    return b;
}

}  // namespace

PixelBox hand_box(const ArticulatedFigure& fig, int H, int W, int which, int pad) {
    HandGeometry g = hand_geometry(fig, H, W, which);
    double minx = 1e30, miny = 1e30, maxx = -1e30, maxy = -1e30;
    auto extend = [&](const std::vector<Vec2>& pts) {
        for (const auto& p : pts) {
            minx = std::min(minx, p.x);
            maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y);
            maxy = std::max(maxy, p.y);
        }
    };
    extend(g.palm);
    for (const auto& f : g.finger) extend(f);
    return clamp_box(minx - pad, miny - pad, maxx + pad, maxy + pad, H, W);
}

PixelBox joints_box(const ArticulatedFigure& fig, int H, int W, const std::vector<int>& joints,
                    double pad_px) {
    auto px = joint_pixel_centers(fig, H, W);
    double minx = 1e30, miny = 1e30, maxx = -1e30, maxy = -1e30;
    for (int j : joints) {
        minx = std::min(minx, px[j].x);
        maxx = std::max(maxx, px[j].x);
        miny = std::min(miny, px[j].y);
        maxy = std::max(maxy, px[j].y);
    }
    return clamp_box(minx - pad_px, miny - pad_px, maxx + pad_px, maxy + pad_px, H, W);
}

PixelBox nonzero_box(const ImageU8& img) {
    PixelBox b;
    b.x0 = img.width;
    b.y0 = img.height;
    b.x1 = -1;
    b.y1 = -1;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const uint8_t* p = img.px(y, x);
            if (p[0] || p[1] || p[2]) {
                b.x0 = std::min(b.x0, x);
                b.x1 = std::max(b.x1, x);
                b.y0 = std::min(b.y0, y);
                b.y1 = std::max(b.y1, y);
            }
        }
    }
    return b;
}

}  // namespace posevid
