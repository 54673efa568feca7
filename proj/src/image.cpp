#include "toolpose/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <png.h>
#include <sstream>

#include "toolpose/errors.hpp"

namespace toolpose {

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1) {
        throw Error(ErrorCode::InvalidArgument, "invalid image shape");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count_if(data_.begin(), data_.end(), [](auto v) { return v != 0; }));
}

void Frame::validate() const {
    if (pixels.channels() != 3) {
        throw Error(ErrorCode::InvalidArgument, "frames must have 3 channels");
    }
    for (double v : pixels.data()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "pixel value outside [0, 1]");
        }
    }
    if (mask && (mask->width() != pixels.width() || mask->height() != pixels.height())) {
        throw Error(ErrorCode::InvalidArgument, "mask size does not match the image");
    }
}

void write_png(const std::filesystem::path& path, const Image& rgb) {
    if (rgb.channels() != 3) {
        throw Error(ErrorCode::InvalidArgument, "write_png expects an RGB image");
    }
    std::vector<png_byte> bytes(rgb.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<png_byte>(std::lround(quantize_unit(rgb.data()[i]) * 255.0));
    }
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(rgb.width());
    image.height = static_cast<png_uint_32>(rgb.height());
    image.format = PNG_FORMAT_RGB;
    if (png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr) == 0) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string() + ": " + image.message);
    }
}

Image read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
        throw Error(ErrorCode::IoError, "cannot read " + path.string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> bytes(PNG_IMAGE_SIZE(image));
    if (png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr) == 0) {
        throw Error(ErrorCode::IoError, "cannot decode " + path.string() + ": " + image.message);
    }
    Image out(static_cast<int>(image.width), static_cast<int>(image.height), 3);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        out.data()[i] = bytes[i] / 255.0;
    }
    return out;
}

void write_pgm(const std::filesystem::path& path, const Mask& mask) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    os << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            os.put(mask(x, y) ? static_cast<char>(255) : '\0');
        }
    }
    if (!os) {
        throw Error(ErrorCode::IoError, "short write to " + path.string());
    }
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& is) {
    std::string tok;
    int c = is.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = is.get();
        } else if (std::isspace(c)) {
            if (!tok.empty()) break;
        } else {
            tok.push_back(static_cast<char>(c));
        }
        c = is.get();
    }
    return tok;
}

}  // namespace

Mask read_pgm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    }
    const std::string magic = pgm_token(is);
    if (magic != "P5") {
        throw Error(ErrorCode::ParseError, path.string() + ": not a binary PGM");
    }
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(pgm_token(is));
        h = std::stoi(pgm_token(is));
        maxval = std::stoi(pgm_token(is));
    } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, path.string() + ": malformed PGM header");
    }
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
        throw Error(ErrorCode::ParseError, path.string() + ": invalid PGM header values");
    }
    const int bytes_per = maxval > 255 ? 2 : 1;
    Mask mask(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int v = 0;
            for (int b = 0; b < bytes_per; ++b) {
                const int c = is.get();
                if (c == EOF) {
                    throw Error(ErrorCode::ParseError, path.string() + ": truncated PGM data");
                }
                v = (v << 8) | c;
            }
            mask.set(x, y, v != 0);
        }
    }
    return mask;
}

Image downsample(const Image& img, int factor) {
    if (factor < 1) {
        throw Error(ErrorCode::InvalidArgument, "downsample factor must be >= 1");
    }
    if (factor == 1) return img;
    const int w = img.width() / factor, h = img.height() / factor;
    Image out(w, h, img.channels());
    const double inv = 1.0 / (factor * factor);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                double s = 0.0;
                for (int dy = 0; dy < factor; ++dy) {
                    for (int dx = 0; dx < factor; ++dx) s += img(x * factor + dx, y * factor + dy, c);
                }
                out(x, y, c) = s * inv;
            }
        }
    }
    return out;
}

Mask downsample(const Mask& mask, int factor) {
    if (factor < 1) {
        throw Error(ErrorCode::InvalidArgument, "downsample factor must be >= 1");
    }
    if (factor == 1) return mask;
    const int w = mask.width() / factor, h = mask.height() / factor;
    Mask out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int n = 0;
            for (int dy = 0; dy < factor; ++dy) {
                for (int dx = 0; dx < factor; ++dx) n += mask(x * factor + dx, y * factor + dy) ? 1 : 0;
            }
            out.set(x, y, 2 * n >= factor * factor);
        }
    }
    return out;
}

}  // namespace toolpose
