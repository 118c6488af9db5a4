#include <doctest.h>

#include <filesystem>
#include <set>

#include "posevid/dataset.hpp"
#include "posevid/render.hpp"
#include "posevid/rng.hpp"

using namespace posevid;

namespace {

// Independent forward kinematics: walks the parent table directly.
std::array<Vec2, kNumJoints> fk_oracle(const ArticulatedFigure& fig) {
    std::array<Vec2, kNumJoints> pos;
    std::array<double, kNumJoints> abs_angle;
    pos[0] = {fig.root_x, fig.root_y};
    abs_angle[0] = -3.14159265358979323846 / 2.0;
    for (int j = 1; j < kNumJoints; ++j) {
        const int p = kJointParent[j];
        const double a = abs_angle[p] + fig.angle[j];
        abs_angle[j] = a;
        pos[j] = {pos[p].x + fig.bone_len[j] * std::cos(a),
                  pos[p].y + fig.bone_len[j] * std::sin(a)};
    }
    return pos;
}

ArticulatedFigure bare_figure() {
    // Everything collapsed onto the root except what a test re-enables.
    ArticulatedFigure fig = rest_figure();
    fig.bone_len.fill(0.0);
    return fig;
}

std::set<std::pair<int, int>> nonzero_pixels(const ImageU8& img) {
    std::set<std::pair<int, int>> px;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const uint8_t* p = img.px(y, x);
            if (p[0] || p[1] || p[2]) px.insert({x, y});
        }
    }
    return px;
}

}  // namespace

TEST_CASE("gen_clip is deterministic and validates inputs") {
    MotionSpec spec;
    spec.preset = "wave";
    auto [c1, s1] = gen_clip(spec, 1, 64, 64, 7);
    auto [c2, s2] = gen_clip(spec, 1, 64, 64, 7);
    CHECK(c1.frames[0] == c2.frames[0]);
    CHECK(s1 == s2);
    CHECK(c1.figure_track[0] == c2.figure_track[0]);

    CHECK_THROWS_AS(gen_clip(spec, 0, 64, 64, 7), std::invalid_argument);
    CHECK_THROWS_AS(gen_clip(spec, 4, 16, 64, 7), std::invalid_argument);
}

TEST_CASE("zero motion amplitude freezes the track") {
    MotionSpec spec;
    spec.preset = "walk";
    spec.amplitude = 0.0;
    auto [clip, streams] = gen_clip(spec, 6, 64, 64, 11);
    for (int f = 1; f < 6; ++f) {
        CHECK(clip.figure_track[f] == clip.figure_track[0]);
        CHECK(clip.frames[f] == clip.frames[0]);
        CHECK(streams.skeleton[f] == streams.skeleton[0]);
        CHECK(streams.surface[f] == streams.surface[0]);
        CHECK(streams.hands[f] == streams.hands[0]);
    }
}

TEST_CASE("walk clip frame 0 matches forward-kinematics oracle") {
    MotionSpec spec;
    spec.preset = "walk";
    auto [clip, streams] = gen_clip(spec, 16, 64, 64, 3);
    const auto& fig = clip.figure_track[0];
    const auto expect = fk_oracle(fig);
    const auto px = joint_pixel_centers(fig, 64, 64);
    for (int j = 0; j < kNumJoints; ++j) {
        CHECK(px[j].x == doctest::Approx(expect[j].x * 64).epsilon(1e-12));
        CHECK(px[j].y == doctest::Approx(expect[j].y * 64).epsilon(1e-12));
    }
}

TEST_CASE("default motion keeps joints inside [-0.25, 1.25]^2") {
    for (const char* preset : {"walk", "wave", "sway", "jump"}) {
        MotionSpec spec;
        spec.preset = preset;
        for (uint64_t seed : {1ull, 42ull, 987654321ull}) {
            for (int f = 0; f < 16; ++f) {
                const auto fig = figure_at_frame(spec, seed, f);
                const auto pos = forward_kinematics(fig);
                for (int j = 0; j < kNumJoints; ++j) {
                    CHECK(pos[j].x > -0.25);
                    CHECK(pos[j].x < 1.25);
                    CHECK(pos[j].y > -0.25);
                    CHECK(pos[j].y < 1.25);
                    CHECK(std::isfinite(pos[j].x));
                    CHECK(std::isfinite(pos[j].y));
                }
            }
        }
    }
}

TEST_CASE("figure fully outside the frame renders black in all styles") {
    ArticulatedFigure fig = rest_figure();
    fig.root_x = 5.0;
    fig.root_y = 5.0;
    CHECK(render_skeleton(fig, 64, 64).all_black());
    CHECK(render_surface(fig, 64, 64).all_black());
    CHECK(render_hands(fig, 64, 64).all_black());
}

TEST_CASE("vertical torso bone stays within its 1-px dilated bounding box") {
    ArticulatedFigure fig = bare_figure();
    fig.bone_len[J_NECK] = 0.4;  // vertical, centered
    fig.root_x = 0.5;
    fig.root_y = 0.7;
    const ImageU8 img = render_skeleton(fig, 64, 64);
    CHECK(!img.all_black());

    // segment endpoints in pixel space, from independent FK
    const auto pos = fk_oracle(fig);
    const double x = pos[J_PELVIS].x * 64;
    const double y0 = pos[J_NECK].y * 64, y1 = pos[J_PELVIS].y * 64;
    const int bx0 = int(std::floor(x)) - 1, bx1 = int(std::floor(x)) + 1;
    const int by0 = int(std::floor(y0)) - 1, by1 = int(std::floor(y1)) + 1;
    for (const auto& [px, py] : nonzero_pixels(img)) {
        CHECK(px >= bx0);
        CHECK(px <= bx1);
        CHECK(py >= by0);
        CHECK(py <= by1);
    }
    // line-pixel enumeration: every integer row crossed by the segment has
    // ink adjacent to the segment's column
    for (int py = int(std::ceil(y0 + 0.5)); py < int(std::floor(y1 - 0.5)); ++py) {
        bool hit = false;
        for (int px = bx0; px <= bx1; ++px) {
            const uint8_t* p = img.px(py, px);
            hit = hit || p[0] || p[1] || p[2];
        }
        CHECK(hit);
    }
}

TEST_CASE("joint pixel centers scale exactly 2x from 64 to 128") {
    const ArticulatedFigure fig = figure_at_frame({.preset = "sway"}, 5, 3);
    const auto p64 = joint_pixel_centers(fig, 64, 64);
    const auto p128 = joint_pixel_centers(fig, 128, 128);
    for (int j = 0; j < kNumJoints; ++j) {
        CHECK(p128[j].x == 2.0 * p64[j].x);
        CHECK(p128[j].y == 2.0 * p64[j].y);
    }
}

TEST_CASE("zero-length capsule renders a disk of the proximal color") {
    ImageU8 img(32, 32);
    const Color c0{10, 200, 30}, c1{250, 40, 90};
    draw_capsule(img, 16.0, 16.0, 16.0, 16.0, 4.0, c0, c1);
    const auto px = nonzero_pixels(img);
    CHECK(!px.empty());
    for (const auto& [x, y] : px) {
        const uint8_t* p = img.px(y, x);
        CHECK(int(p[0]) == int(c0.r));
        CHECK(int(p[1]) == int(c0.g));
        CHECK(int(p[2]) == int(c0.b));
        CHECK(std::hypot(x + 0.5 - 16.0, y + 0.5 - 16.0) <= 4.0);
    }
    // it is the full disk: every pixel center within the radius is covered
    int64_t covered = 0;
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            if (std::hypot(x + 0.5 - 16.0, y + 0.5 - 16.0) <= 4.0) ++covered;
        }
    }
    CHECK(int64_t(px.size()) == covered);
}

TEST_CASE("horizontal capsule midpoint is the 50% color blend") {
    ArticulatedFigure fig = bare_figure();
    fig.root_x = 0.25;
    fig.root_y = 0.5;
    fig.angle[J_L_SHOULDER] = 3.14159265358979323846 / 2.0;  // absolute +x
    fig.angle[J_L_ELBOW] = 0.0;
    fig.bone_len[J_L_ELBOW] = 0.45;
    const ImageU8 img = render_surface(fig, 64, 64);

    const auto pos = fk_oracle(fig);
    const double x0 = pos[J_L_SHOULDER].x * 64, y0 = pos[J_L_SHOULDER].y * 64;
    const double x1 = pos[J_L_ELBOW].x * 64, y1 = pos[J_L_ELBOW].y * 64;
    // pixel whose center sits closest to the midpoint
    const double mx = (x0 + x1) / 2, my = (y0 + y1) / 2;
    const int px = int(std::floor(mx - 0.5 + 0.5)), py = int(std::floor(my - 0.5 + 0.5));
    const double t = ((px + 0.5 - x0) * (x1 - x0) + (py + 0.5 - y0) * (y1 - y0)) /
                     ((x1 - x0) * (x1 - x0) + (y1 - y0) * (y1 - y0));
    const auto pal = kSurfacePalette[LIMB_L_UPPER_ARM];
    const uint8_t* p = img.px(py, px);
    auto blend = [&](uint8_t a, uint8_t b) { return double(a) + t * (double(b) - double(a)); };
    CHECK(std::abs(double(p[0]) - blend(pal.first.r, pal.second.r)) <= 1.0);
    CHECK(std::abs(double(p[1]) - blend(pal.first.g, pal.second.g)) <= 1.0);
    CHECK(std::abs(double(p[2]) - blend(pal.first.b, pal.second.b)) <= 1.0);
    // and the exact 50% blend is within the same quantization level
    CHECK(std::abs(double(p[0]) - (double(pal.first.r) + pal.second.r) / 2) <= 2.0);
}

TEST_CASE("painter order: overlap pixels carry the nearer limb's color") {
    ArticulatedFigure fig = bare_figure();
    fig.root_x = 0.5;
    fig.root_y = 0.5;
    // two horizontal overlapping arm segments, left nearer
    fig.angle[J_L_SHOULDER] = 3.14159265358979323846 / 2.0;
    fig.bone_len[J_L_ELBOW] = 0.3;
    fig.angle[J_L_ELBOW] = 0.0;
    fig.angle[J_R_SHOULDER] = 3.14159265358979323846 / 2.0;  // same direction
    fig.bone_len[J_R_ELBOW] = 0.3;
    fig.angle[J_R_ELBOW] = 0.0;
    fig.limb_depth[LIMB_L_UPPER_ARM] = 0.2;
    fig.limb_depth[LIMB_R_UPPER_ARM] = 0.8;
    const ImageU8 img = render_surface(fig, 64, 64);

    // reference render with only the left arm present
    ArticulatedFigure only_l = fig;
    only_l.bone_len[J_R_ELBOW] = 0.0;
    const ImageU8 img_l = render_surface(only_l, 64, 64, LIMB_R_UPPER_ARM);

    // interior of the shared segment (clear of the degenerate root cluster):
    // the nearer (left) limb wins everywhere
    for (int x = 38; x <= 48; ++x) {
        const uint8_t* p = img.px(32, x);
        const uint8_t* pl = img_l.px(32, x);
        CHECK(int(p[0]) == int(pl[0]));
        CHECK(int(p[1]) == int(pl[1]));
        CHECK(int(p[2]) == int(pl[2]));
    }

    // flipped depths flip the winner
    fig.limb_depth[LIMB_L_UPPER_ARM] = 0.8;
    fig.limb_depth[LIMB_R_UPPER_ARM] = 0.2;
    const ImageU8 img2 = render_surface(fig, 64, 64);
    ArticulatedFigure only_r = fig;
    only_r.bone_len[J_L_ELBOW] = 0.0;
    const ImageU8 img_r = render_surface(only_r, 64, 64, LIMB_L_UPPER_ARM);
    for (int x = 38; x <= 48; ++x) {
        const uint8_t* p = img2.px(32, x);
        const uint8_t* pr = img_r.px(32, x);
        CHECK(int(p[0]) == int(pr[0]));
        CHECK(int(p[1]) == int(pr[1]));
        CHECK(int(p[2]) == int(pr[2]));
    }
}

TEST_CASE("hands: off-frame black, open hand at depth 0 hits max brightness") {
    ArticulatedFigure fig = rest_figure();
    fig.root_x = -4.0;
    CHECK(render_hands(fig, 64, 64).all_black());

    fig = rest_figure();
    fig.hand_depth = {0.0, 0.0};
    fig.hand_curl = {0.0, 0.0};
    const ImageU8 img = render_hands(fig, 64, 64, LIMB_R_HAND);
    const auto px = nonzero_pixels(img);
    CHECK(!px.empty());
    // tier 0 = unshaded base color everywhere on the left hand
    for (const auto& [x, y] : px) {
        const uint8_t* p = img.px(y, x);
        CHECK(int(p[0]) == 255);
        CHECK(int(p[1]) == 210);
        CHECK(int(p[2]) == 150);
    }
}

TEST_CASE("fist bounding box is under 40% of the open-hand box") {
    ArticulatedFigure open_fig = rest_figure();
    open_fig.hand_depth = {0.0, 0.0};
    open_fig.hand_curl = {0.0, 0.0};
    ArticulatedFigure fist_fig = open_fig;
    fist_fig.hand_curl[0] = 1.0;

    const ImageU8 open_img = render_hands(open_fig, 64, 64, LIMB_R_HAND);
    const ImageU8 fist_img = render_hands(fist_fig, 64, 64, LIMB_R_HAND);
    const PixelBox open_box = nonzero_box(open_img);
    const PixelBox fist_box = nonzero_box(fist_img);
    REQUIRE(!open_box.empty());
    REQUIRE(!fist_box.empty());
    CHECK(double(fist_box.area()) < 0.40 * double(open_box.area()));

    // polygon-geometry oracle: rendered boxes match hand_box within 2 px
    const PixelBox gb = hand_box(open_fig, 64, 64, 0, 0);
    CHECK(std::abs(gb.x0 - open_box.x0) <= 2);
    CHECK(std::abs(gb.x1 - open_box.x1) <= 2);
    CHECK(std::abs(gb.y0 - open_box.y0) <= 2);
    CHECK(std::abs(gb.y1 - open_box.y1) <= 2);

    // minimum enforced hand scale: at least 8x8 px when on-frame
    CHECK(open_box.x1 - open_box.x0 + 1 >= 8);
    CHECK(open_box.y1 - open_box.y0 + 1 >= 8);
}

TEST_CASE("corrupt_stream: identity, blanking, and jitter oracle") {
    MotionSpec spec;
    spec.preset = "walk";
    auto [clip, streams] = gen_clip(spec, 8, 64, 64, 21);

    CorruptionSpec cs;
    cs.mode = CorruptionMode::BlankFrames;
    cs.target_stream = 0;
    cs.probability = 0.0;
    const auto same = corrupt_stream(streams, clip.figure_track, cs, 5);
    CHECK(same == streams);

    cs.mode = CorruptionMode::BlankStream;
    cs.target_stream = 1;
    const auto blanked = corrupt_stream(streams, clip.figure_track, cs, 5);
    for (int f = 0; f < 8; ++f) {
        CHECK(blanked.surface[f].all_black());
        CHECK(blanked.skeleton[f] == streams.skeleton[f]);
        CHECK(blanked.hands[f] == streams.hands[f]);
    }

    cs.mode = CorruptionMode::Jitter;
    cs.target_stream = 0;
    cs.frame_set = {2, 5};
    cs.magnitude = 0.5;
    const uint64_t seed = 99;
    const auto jittered = corrupt_stream(streams, clip.figure_track, cs, seed);
    for (int f = 0; f < 8; ++f) {
        if (f == 2 || f == 5) {
            const auto fig = jitter_figure(clip.figure_track[f], 0.5, seed, f);
            CHECK(jittered.skeleton[f] == render_skeleton(fig, 64, 64));
        } else {
            CHECK(jittered.skeleton[f] == streams.skeleton[f]);
        }
        CHECK(jittered.surface[f] == streams.surface[f]);
        CHECK(jittered.hands[f] == streams.hands[f]);
    }

    cs.target_stream = 3;
    CHECK_THROWS_AS(corrupt_stream(streams, clip.figure_track, cs, 1), std::invalid_argument);

    cs.target_stream = 2;
    cs.frame_set = {11};
    CHECK_THROWS_AS(corrupt_stream(streams, clip.figure_track, cs, 1), std::invalid_argument);

    // drop_limb: deterministic and only the target stream changes
    CorruptionSpec dl;
    dl.mode = CorruptionMode::DropLimb;
    dl.target_stream = 1;
    dl.probability = 1.0;
    const auto dropped = corrupt_stream(streams, clip.figure_track, dl, 7);
    const auto dropped2 = corrupt_stream(streams, clip.figure_track, dl, 7);
    CHECK(dropped == dropped2);
    CHECK(dropped.skeleton[0] == streams.skeleton[0]);
    bool changed = false;
    for (int f = 0; f < 8; ++f) changed = changed || !(dropped.surface[f] == streams.surface[f]);
    CHECK(changed);
}

TEST_CASE("render locality: wrist-angle change stays inside the arm region") {
    const std::vector<int> left_arm = {J_L_SHOULDER, J_L_ELBOW, J_L_WRIST, J_L_PALM,
                                       J_L_FINGER0, J_L_FINGER1, J_L_FINGER2, J_L_FINGER3,
                                       J_L_FINGER4};
    ArticulatedFigure a = rest_figure();
    ArticulatedFigure b = a;
    b.angle[J_L_PALM] += 0.9;  // rotate the hand about the wrist

    const PixelBox box_a = joints_box(a, 64, 64, left_arm, 8.0);
    const PixelBox box_b = joints_box(b, 64, 64, left_arm, 8.0);
    auto in_union = [&](int x, int y) {
        auto in = [&](const PixelBox& bx) {
            return x >= bx.x0 - 2 && x <= bx.x1 + 2 && y >= bx.y0 - 2 && y <= bx.y1 + 2;
        };
        return in(box_a) || in(box_b);
    };
    for (int style = 0; style < 3; ++style) {
        ImageU8 ia = style == 0 ? render_skeleton(a, 64, 64)
                                : (style == 1 ? render_surface(a, 64, 64) : render_hands(a, 64, 64));
        ImageU8 ib = style == 0 ? render_skeleton(b, 64, 64)
                                : (style == 1 ? render_surface(b, 64, 64) : render_hands(b, 64, 64));
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                const uint8_t* pa = ia.px(y, x);
                const uint8_t* pb = ib.px(y, x);
                if (pa[0] != pb[0] || pa[1] != pb[1] || pa[2] != pb[2]) {
                    INFO("style ", style, " pixel ", x, ",", y);
                    CHECK(in_union(x, y));
                }
            }
        }
    }
}

TEST_CASE("clip and stream alignment") {
    MotionSpec spec;
    spec.preset = "jump";
    auto [clip, streams] = gen_clip(spec, 5, 96, 64, 2);
    CHECK(clip.num_frames() == 5);
    CHECK(streams.num_frames() == 5);
    CHECK(int(clip.figure_track.size()) == 5);
    for (int f = 0; f < 5; ++f) {
        for (const ImageU8* img : {&clip.frames[f], &streams.skeleton[f], &streams.surface[f],
                                   &streams.hands[f]}) {
            CHECK(img->height == 96);
            CHECK(img->width == 64);
        }
    }
}

TEST_CASE("dataset round-trips losslessly through disk") {
    namespace fs = std::filesystem;
    const std::string root = (fs::temp_directory_path() / "posevid_ds_test").string();
    fs::remove_all(root);
    const auto built = build_dataset(root, 2, 4, 64, 64, 77);
    const auto loaded = load_dataset(root);
    REQUIRE(loaded.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(loaded[i].clip.clip_id == built[i].clip.clip_id);
        CHECK(loaded[i].seed == built[i].seed);
        CHECK(loaded[i].motion == built[i].motion);
        for (int f = 0; f < 4; ++f) {
            CHECK(loaded[i].clip.frames[f] == built[i].clip.frames[f]);
            CHECK(loaded[i].streams.skeleton[f] == built[i].streams.skeleton[f]);
            CHECK(loaded[i].streams.surface[f] == built[i].streams.surface[f]);
            CHECK(loaded[i].streams.hands[f] == built[i].streams.hands[f]);
            CHECK(loaded[i].clip.figure_track[f] == built[i].clip.figure_track[f]);
        }
    }
    fs::remove_all(root);
}
