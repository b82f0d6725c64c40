// SPDX-License-Identifier: Apache-2.0

#include "sqoe/lifting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <regex>

#include "sqoe/error.hpp"

namespace sqoe {

void LiftConfig::validate() const {
    require(std::isfinite(baseline_scale) && baseline_scale > 0.0, ErrorKind::invalid_argument,
            "baseline_scale must be finite and positive");
    if (inpainter == InpainterKind::external) {
        require(!inpaint_command.empty(), ErrorKind::unsupported,
                "external inpainter selected but no command configured");
    }
}

DepthMap::DepthMap(ScalarGrid grid) : depth(std::move(grid)) {
    valid.resize(depth.values.size());
    for (std::size_t i = 0; i < valid.size(); ++i) {
        valid[i] = std::isfinite(depth.values[i]) ? 1 : 0;
    }
}

DepthMap::DepthMap(ScalarGrid grid, Mask valid_mask)
    : depth(std::move(grid)), valid(std::move(valid_mask)) {
    require(valid.size() == depth.values.size(), ErrorKind::dimension_mismatch,
            "depth validity mask does not match depth grid");
}

// ---- NPY ---------------------------------------------------------------------

ScalarGrid read_npy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::io, "cannot open '" + path.string() + "'");
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    require(in.good() && std::memcmp(magic.data(), "\x93NUMPY", 6) == 0, ErrorKind::decode,
            "'" + path.string() + "' is not an NPY file");
    const int major = static_cast<unsigned char>(magic[6]);
    std::uint32_t header_len = 0;
    if (major == 1) {
        std::array<unsigned char, 2> b{};
        in.read(reinterpret_cast<char*>(b.data()), 2);
        header_len = b[0] | (b[1] << 8);
    } else {
        std::array<unsigned char, 4> b{};
        in.read(reinterpret_cast<char*>(b.data()), 4);
        header_len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    require(in.good(), ErrorKind::decode, "truncated NPY header");

    std::smatch m;
    require(std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([<>|=]?)([fi])(\d))")),
            ErrorKind::decode, "NPY header lacks a supported descr");
    const bool big_endian = m[1] == ">";
    const char type = m[2].str()[0];
    const int bytes = std::stoi(m[3]);
    require(!big_endian, ErrorKind::unsupported, "big-endian NPY is not supported");
    require((type == 'f' && (bytes == 4 || bytes == 8)), ErrorKind::unsupported,
            "NPY dtype must be float32 or float64");
    require(!std::regex_search(header, std::regex(R"('fortran_order'\s*:\s*True)")),
            ErrorKind::unsupported, "Fortran-ordered NPY is not supported");
    require(std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(\s*(\d+)\s*,\s*(\d+)\s*,?\s*\))")),
            ErrorKind::decode, "NPY shape must be 2-D");
    const int h = std::stoi(m[1]);
    const int w = std::stoi(m[2]);

    ScalarGrid grid(w, h);
    const auto n = grid.values.size();
    if (bytes == 4) {
        std::vector<float> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4));
        require(in.good(), ErrorKind::decode, "truncated NPY payload");
        grid.values = std::move(buf);
    } else {
        std::vector<double> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 8));
        require(in.good(), ErrorKind::decode, "truncated NPY payload");
        std::transform(buf.begin(), buf.end(), grid.values.begin(),
                       [](double v) { return static_cast<float>(v); });
    }
    return grid;
}

void write_npy(const std::filesystem::path& path, const ScalarGrid& grid) {
    std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" +
                         std::to_string(grid.height) + ", " + std::to_string(grid.width) + "), }";
    const std::size_t preamble = 10;
    const std::size_t total = ((preamble + header.size() + 1 + 63) / 64) * 64;
    header.append(total - preamble - header.size() - 1, ' ');
    header.push_back('\n');

    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::io, "cannot write '" + path.string() + "'");
    out.write("\x93NUMPY\x01\x00", 8);
    const auto len = static_cast<std::uint16_t>(header.size());
    const std::array<char, 2> len_bytes = {static_cast<char>(len & 0xFF),
                                           static_cast<char>(len >> 8)};
    out.write(len_bytes.data(), 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(grid.values.data()),
              static_cast<std::streamsize>(grid.values.size() * sizeof(float)));
}

DepthMap load_depth(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".npy") {
        return DepthMap(read_npy(path));
    }
    if (ext == ".png") {
        auto grid = read_png_gray16(path);
        Mask valid(grid.values.size());
        for (std::size_t i = 0; i < valid.size(); ++i) {
            valid[i] = grid.values[i] > 0.0F ? 1 : 0;
        }
        return DepthMap(std::move(grid), std::move(valid));
    }
    fail(ErrorKind::unsupported, "depth maps must be .npy or .png, got '" + ext + "'");
}

DisparityMap depth_to_disparity(const DepthMap& depth, const LiftConfig& cfg) {
    cfg.validate();
    DisparityMap disp(depth.width(), depth.height());
    for (std::size_t i = 0; i < depth.depth.values.size(); ++i) {
        disp.valid[i] = depth.valid[i];
        if (depth.valid[i] == 0) {
            disp.values[i] = 0.0F;
            continue;
        }
        const float d = depth.depth.values[i];
        require(std::isfinite(d) && d > 0.0F, ErrorKind::invalid_argument,
                "non-positive depth inside the valid mask");
        disp.values[i] = static_cast<float>(cfg.baseline_scale / static_cast<double>(d));
    }
    return disp;
}

// ---- inpainting --------------------------------------------------------------

namespace {

struct Level {
    int width = 0;
    int height = 0;
    std::vector<double> color;   // rgb interleaved
    std::vector<double> weight;  // 0 = unknown

    Level(int w, int h) : width(w), height(h), color(static_cast<std::size_t>(w) * h * 3, 0.0),
                          weight(static_cast<std::size_t>(w) * h, 0.0) {}
    [[nodiscard]] std::size_t idx(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
    }
    [[nodiscard]] bool complete() const {
        return std::all_of(weight.begin(), weight.end(), [](double w) { return w > 0.0; });
    }
};

Level push(const Level& fine) {
    Level coarse((fine.width + 1) / 2, (fine.height + 1) / 2);
    for (int y = 0; y < coarse.height; ++y) {
        for (int x = 0; x < coarse.width; ++x) {
            std::array<double, 3> acc{};
            double wsum = 0.0;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const int fx = 2 * x + dx;
                    const int fy = 2 * y + dy;
                    if (fx >= fine.width || fy >= fine.height) {
                        continue;
                    }
                    const auto i = fine.idx(fx, fy);
                    const double w = fine.weight[i];
                    for (std::size_t c = 0; c < 3; ++c) {
                        acc[c] += w * fine.color[i * 3 + c];
                    }
                    wsum += w;
                }
            }
            const auto o = coarse.idx(x, y);
            if (wsum > 0.0) {
                for (std::size_t c = 0; c < 3; ++c) {
                    coarse.color[o * 3 + c] = acc[c] / wsum;
                }
                coarse.weight[o] = std::min(1.0, wsum);
            }
        }
    }
    return coarse;
}

double coarse_sample(const Level& coarse, double x, double y, std::size_t c) {
    x = std::clamp(x, 0.0, static_cast<double>(coarse.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(coarse.height - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, coarse.width - 1);
    const int y1 = std::min(y0 + 1, coarse.height - 1);
    const double tx = x - x0;
    const double ty = y - y0;
    const auto v = [&](int xx, int yy) { return coarse.color[coarse.idx(xx, yy) * 3 + c]; };
    return (1.0 - ty) * ((1.0 - tx) * v(x0, y0) + tx * v(x1, y0)) +
           ty * ((1.0 - tx) * v(x0, y1) + tx * v(x1, y1));
}

void pull(Level& fine, const Level& coarse) {
    for (int y = 0; y < fine.height; ++y) {
        for (int x = 0; x < fine.width; ++x) {
            const auto i = fine.idx(x, y);
            if (fine.weight[i] >= 1.0) {
                continue;
            }
            const double cx = (x + 0.5) / 2.0 - 0.5;
            const double cy = (y + 0.5) / 2.0 - 0.5;
            const double w = fine.weight[i];
            for (std::size_t c = 0; c < 3; ++c) {
                fine.color[i * 3 + c] =
                    w * fine.color[i * 3 + c] + (1.0 - w) * coarse_sample(coarse, cx, cy, c);
            }
            fine.weight[i] = 1.0;
        }
    }
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

ImagePlane mirror(const ImagePlane& p) {
    ImagePlane out(p.width(), p.height());
    for (int y = 0; y < p.height(); ++y) {
        for (int x = 0; x < p.width(); ++x) {
            out.set_pixel(p.width() - 1 - x, y, p.pixel(x, y));
        }
    }
    return out;
}

template <typename T>
std::vector<T> mirror_rows(const std::vector<T>& v, int w, int h) {
    std::vector<T> out(v.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out[static_cast<std::size_t>(y) * w + (w - 1 - x)] = v[static_cast<std::size_t>(y) * w + x];
        }
    }
    return out;
}

}  // namespace

ImagePlane inpaint_push_pull(const ImagePlane& image, const Mask& holes) {
    require(holes.size() == image.pixel_count(), ErrorKind::dimension_mismatch,
            "hole mask does not match image size");
    if (std::none_of(holes.begin(), holes.end(), [](auto h) { return h != 0; })) {
        return image;
    }
    require(std::any_of(holes.begin(), holes.end(), [](auto h) { return h == 0; }),
            ErrorKind::invalid_argument, "cannot inpaint an image without known pixels");

    std::vector<Level> pyramid;
    pyramid.emplace_back(image.width(), image.height());
    auto& base = pyramid.front();
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const auto i = base.idx(x, y);
            if (holes[i] == 0) {
                const auto px = image.pixel(x, y);
                for (std::size_t c = 0; c < 3; ++c) {
                    base.color[i * 3 + c] = px[c];
                }
                base.weight[i] = 1.0;
            }
        }
    }
    while (!pyramid.back().complete()) {
        pyramid.push_back(push(pyramid.back()));
    }
    for (auto level = pyramid.size() - 1; level > 0; --level) {
        pull(pyramid[level - 1], pyramid[level]);
    }

    ImagePlane out = image;
    const auto& filled = pyramid.front();
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const auto i = filled.idx(x, y);
            if (holes[i] != 0) {
                Rgb8 px{};
                for (std::size_t c = 0; c < 3; ++c) {
                    px[c] = static_cast<std::uint8_t>(
                        std::clamp(std::nearbyint(filled.color[i * 3 + c]), 0.0, 255.0));
                }
                out.set_pixel(x, y, px);
            }
        }
    }
    return out;
}

ImagePlane inpaint_external(const ImagePlane& image, const Mask& holes,
                            const std::string& command, const std::filesystem::path& work_dir) {
    require(!command.empty(), ErrorKind::unsupported, "no external inpainter command configured");
    require(holes.size() == image.pixel_count(), ErrorKind::dimension_mismatch,
            "hole mask does not match image size");
    const auto dir = work_dir.empty() ? std::filesystem::temp_directory_path() / "sqoe_inpaint"
                                      : work_dir;
    std::filesystem::create_directories(dir);

    ImagePlane hole_png(image.width(), image.height());
    ImagePlane masked = image;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (holes[static_cast<std::size_t>(y) * image.width() + x] != 0) {
                hole_png.set_pixel(x, y, {255, 255, 255});
                masked.set_pixel(x, y, {0, 0, 0});
            }
        }
    }
    write_png(dir / "hole.png", hole_png);
    write_png(dir / "masked.png", masked);
    std::filesystem::remove(dir / "filled.png");

    const auto cmd = replace_all(command, "{dir}", dir.string());
    const int rc = std::system(cmd.c_str());
    require(rc == 0, ErrorKind::unsupported,
            "external inpainter exited with status " + std::to_string(rc));
    require(std::filesystem::exists(dir / "filled.png"), ErrorKind::not_found,
            "external inpainter did not produce filled.png");
    const auto filled = read_png(dir / "filled.png");
    require(filled.same_size(image), ErrorKind::dimension_mismatch,
            "filled.png differs in size from the input");

    ImagePlane out = image;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (holes[static_cast<std::size_t>(y) * image.width() + x] != 0) {
                out.set_pixel(x, y, filled.pixel(x, y));
            }
        }
    }
    return out;
}

DepthMap estimate_depth_external(const std::filesystem::path& image_path, const LiftConfig& cfg) {
    require(!cfg.depth_command.empty(), ErrorKind::unsupported,
            "external depth estimator selected but no command configured");
    const auto dir = cfg.work_dir.empty() ? std::filesystem::temp_directory_path() / "sqoe_depth"
                                          : cfg.work_dir;
    std::filesystem::create_directories(dir);
    const auto output = dir / "depth.npy";
    std::filesystem::remove(output);
    auto cmd = replace_all(cfg.depth_command, "{input}", image_path.string());
    cmd = replace_all(cmd, "{output}", output.string());
    const int rc = std::system(cmd.c_str());
    require(rc == 0, ErrorKind::unsupported,
            "external depth estimator exited with status " + std::to_string(rc));
    return load_depth(output);
}

LiftResult lift_to_stereo_detailed(const ImagePlane& mono, const DepthMap& depth,
                                   const LiftConfig& cfg) {
    cfg.validate();
    require(mono.width() == depth.width() && mono.height() == depth.height(),
            ErrorKind::dimension_mismatch, "mono image and depth map differ in size");
    auto disp = depth_to_disparity(depth, cfg);

    const bool left = cfg.target_view == TargetView::synthesize_left;
    // The left view is synthesized in a mirrored frame so that nearer content
    // moves rightward while the splat rules stay identical.
    const ImagePlane src = left ? mirror(mono) : mono;
    if (left) {
        disp.values = mirror_rows(disp.values, disp.width, disp.height);
        disp.valid = mirror_rows(disp.valid, disp.width, disp.height);
    }
    auto warp = forward_warp(src, disp);
    auto filled = cfg.inpainter == InpainterKind::external
                      ? inpaint_external(warp.image, warp.hole_mask, cfg.inpaint_command,
                                         cfg.work_dir)
                      : inpaint_push_pull(warp.image, warp.hole_mask);
    if (left) {
        filled = mirror(filled);
        warp.image = mirror(warp.image);
        warp.hole_mask = mirror_rows(warp.hole_mask, mono.width(), mono.height());
        return {StereoImage(std::move(filled), mono), std::move(warp)};
    }
    return {StereoImage(mono, std::move(filled)), std::move(warp)};
}

}  // namespace sqoe
