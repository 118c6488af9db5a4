#ifndef POSEVID_RENDER_HPP
#define POSEVID_RENDER_HPP

#include <array>
#include <vector>

#include "posevid/figure.hpp"
#include "posevid/image.hpp"

namespace posevid {

struct Color {
    uint8_t r = 0, g = 0, b = 0;
};

// Integer rasterization only; pixels are covered when their center lies
// inside the primitive. All coordinates are continuous pixel units
// (normalized x maps to x*W, y to y*H).
void draw_disk(ImageU8& img, double cx, double cy, double radius, Color c);
// Capsule around segment (x0,y0)-(x1,y1); color interpolates c0 -> c1 along
// the segment's projection parameter, rounded per channel.
void draw_capsule(ImageU8& img, double x0, double y0, double x1, double y1, double radius,
                  Color c0, Color c1);
void fill_convex_poly(ImageU8& img, const std::vector<Vec2>& pts_px, Color c);

// Continuous pixel-space joint centers: (x*W, y*H).
std::array<Vec2, kNumJoints> joint_pixel_centers(const ArticulatedFigure& fig, int H, int W);

// DWPose-style rendering: bones as colored segments, joints as colored disks,
// group draw order legs / arms / torso / head / hands. skip_limb omits one
// body segment (-1 = none).
ImageU8 render_skeleton(const ArticulatedFigure& fig, int H, int W, int skip_limb = -1);

// Body-surface rendering: filled capsules per limb, proximal->distal gradient
// between a fixed per-limb color pair, painter order from limb_depth (farther
// first).
ImageU8 render_surface(const ArticulatedFigure& fig, int H, int W, int skip_limb = -1);

// Hands-only rendering: palm hexagon plus five finger quads per hand, polygon
// brightness from quantized per-finger depth tiers. Curl folds fingers toward
// the viewer, shortening their projection and shifting their depth tier.
ImageU8 render_hands(const ArticulatedFigure& fig, int H, int W, int skip_limb = -1);

// Ground-truth appearance rendering; palette chosen by fig.appearance_seed.
ImageU8 render_appearance(const ArticulatedFigure& fig, int H, int W);

// Pixel-space hand geometry (palm hexagon + finger quads), shared by the
// hands renderer, its tests, and hand-region metrics. which: 0 = left,
// 1 = right.
struct HandGeometry {
    std::vector<Vec2> palm;                   // hexagon
    std::array<std::vector<Vec2>, 5> finger;  // quads
    std::array<double, 5> finger_depth;
    double palm_depth = 0.0;
};
HandGeometry hand_geometry(const ArticulatedFigure& fig, int H, int W, int which);

// Integer bounding box, half-open on neither side: [x0,x1]x[y0,y1]; empty()
// when nothing is inside the frame.
struct PixelBox {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
    bool empty() const { return x1 < x0 || y1 < y0; }
    int64_t area() const { return empty() ? 0 : int64_t(x1 - x0 + 1) * (y1 - y0 + 1); }
};

// Box around both-hand geometry (or one hand), padded and clamped to frame.
PixelBox hand_box(const ArticulatedFigure& fig, int H, int W, int which, int pad = 2);
// Box around a set of joints, padded by `pad_px` plus the largest draw radius,
// clamped to frame.
PixelBox joints_box(const ArticulatedFigure& fig, int H, int W, const std::vector<int>& joints,
                    double pad_px);
// Box of nonzero pixels in an image.
PixelBox nonzero_box(const ImageU8& img);

// Depth tier used by the hands renderer: 5 tiers over depth [0,1], tier 0
// brightest.
int depth_tier(double depth);
double tier_brightness(int tier);

extern const std::array<std::pair<Color, Color>, kNumLimbs> kSurfacePalette;

}  // namespace posevid

#endif
