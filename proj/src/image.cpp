#include "dmfnet/image.hpp"

#include <cctype>
#include <fstream>

namespace dmfnet {

namespace {

// header token reader: skips whitespace and '#' comment lines
std::string next_token(std::istream& is) {
    std::string tok;
    int ch;
    while ((ch = is.get()) != EOF) {
        if (ch == '#') {
            while ((ch = is.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (!std::isspace(ch)) break;
    }
    if (ch == EOF) return tok;
    tok.push_back(static_cast<char>(ch));
    while ((ch = is.get()) != EOF && !std::isspace(ch)) tok.push_back(static_cast<char>(ch));
    return tok;
}

int parse_int(const std::string& tok, const std::string& path, const char* what) {
    if (tok.empty()) throw Error("pgm: truncated header in '" + path + "'");
    for (char c : tok)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw Error("pgm: malformed " + std::string(what) + " in '" + path + "'");
    return std::stoi(tok);
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("pgm: cannot open '" + path + "'");
    std::string magic = next_token(is);
    if (magic != "P5") throw Error("pgm: '" + path + "' is not binary PGM (P5)");
    int w = parse_int(next_token(is), path, "width");
    int h = parse_int(next_token(is), path, "height");
    int maxval = parse_int(next_token(is), path, "maxval");
    if (maxval != 255)
        throw Error("pgm: unsupported maxval " + std::to_string(maxval) + " in '" + path + "'");
    if (w < 1 || h < 1) throw Error("pgm: bad dimensions in '" + path + "'");
    GrayImage img(w, h);
    is.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (is.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw Error("pgm: truncated payload in '" + path + "'");
    return img;
}

void write_pgm(const GrayImage& image, const std::string& path) {
    if (image.width < 1 || image.height < 1) throw Error("pgm: empty image");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("pgm: cannot open '" + path + "' for writing");
    os << "P5\n" << image.width << " " << image.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(image.pixels.data()),
             static_cast<std::streamsize>(image.pixels.size()));
    if (!os) throw Error("pgm: write failed for '" + path + "'");
}

std::vector<GrayImage> extract_patches(const GrayImage& image, int patch) {
    if (patch < 1) throw Error("extract_patches: patch size must be positive");
    if (image.width % patch != 0 || image.height % patch != 0)
        throw Error("extract_patches: image " + std::to_string(image.width) + "x" +
                    std::to_string(image.height) + " is not divisible by patch size " +
                    std::to_string(patch));
    const int rows = image.height / patch;
    const int cols = image.width / patch;
    std::vector<GrayImage> patches;
    patches.reserve(static_cast<size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            GrayImage p(patch, patch);
            for (int y = 0; y < patch; ++y) {
                const uint8_t* src = &image.pixels[static_cast<size_t>(r * patch + y) * image.width +
                                                   static_cast<size_t>(c) * patch];
                std::copy(src, src + patch, &p.pixels[static_cast<size_t>(y) * patch]);
            }
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

}  // namespace dmfnet
