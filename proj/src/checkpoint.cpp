#include "motionloc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <json.hpp>

#include "motionloc/config_json.hpp"

namespace motionloc {

namespace {

constexpr char kMagic[8] = {'M', 'L', 'O', 'C', 'C', 'K', 'P', 'T'};
constexpr char kTrailer[8] = {'M', 'L', 'O', 'C', 'E', 'N', 'D', '!'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    template <typename T>
    void pod(T v) { bytes(&v, sizeof(T)); }
    void str(const std::string& s) {
        pod(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    const std::vector<char>& buffer() const { return buf_; }

private:
    std::vector<char> buf_;
};

class Reader {
public:
    explicit Reader(std::vector<char> data) : data_(std::move(data)) {}

    void bytes(void* p, std::size_t n) {
        if (n > data_.size() - pos_) throw CheckpointError(CheckpointError::Kind::corrupt, "checkpoint is truncated");
        std::memcpy(p, data_.data() + pos_, n);
        pos_ += n;
    }
    template <typename T>
    T pod() {
        T v;
        bytes(&v, sizeof(T));
        return v;
    }
    std::string str(std::size_t n) {
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::vector<char> data_;
    std::size_t pos_ = 0;
};

nlohmann::json loss_history_json(const std::vector<LossBreakdown>& history) {
    auto arr = nlohmann::json::array();
    for (const auto& b : history) arr.push_back(b);
    return arr;
}

[[noreturn]] void corrupt(const std::string& what) { throw CheckpointError(CheckpointError::Kind::corrupt, what); }

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    ckpt.params.validate();
    nlohmann::json header = {
        {"architecture", ckpt.params.config()},
        {"training", ckpt.config},
        {"step", ckpt.step},
        {"selected_seed", ckpt.selected_seed},
        {"restarts", ckpt.restarts},
        {"loss_history", loss_history_json(ckpt.loss_history)},
    };
    const std::string text = header.dump();

    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.pod<std::uint32_t>(ckpt.format_version);
    w.pod<std::uint64_t>(text.size());
    w.bytes(text.data(), text.size());
    const auto& arrays = ckpt.params.arrays();
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(arrays.size()));
    for (const auto& a : arrays) {
        w.str(a.name);
        w.pod<std::uint32_t>(static_cast<std::uint32_t>(a.dims.size()));
        for (int d : a.dims) w.pod<std::uint32_t>(static_cast<std::uint32_t>(d));
        w.pod<std::uint8_t>(a.trainable ? 1 : 0);
        w.bytes(a.values.data(), a.values.size() * sizeof(float));
    }
    w.bytes(kTrailer, sizeof(kTrailer));

    if (path.has_parent_path()) {
        std::error_code dir_ec;
        std::filesystem::create_directories(path.parent_path(), dir_ec);
        if (dir_ec)
            throw CheckpointError(CheckpointError::Kind::io,
                                  "cannot create '" + path.parent_path().string() + "': " + dir_ec.message());
    }
    // Write to a sibling file first so an interrupted save never leaves a half-written checkpoint.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot open '" + tmp.string() + "' for writing");
        out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
        if (!out) throw CheckpointError(CheckpointError::Kind::io, "failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw CheckpointError(CheckpointError::Kind::io, "cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint '" + path.string() + "'");
    Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) corrupt("'" + path.string() + "' is not a checkpoint");

    Checkpoint ckpt;
    ckpt.format_version = r.pod<std::uint32_t>();
    if (ckpt.format_version != Checkpoint::kFormatVersion)
        throw CheckpointError(CheckpointError::Kind::version,
                              "unsupported checkpoint format version " + std::to_string(ckpt.format_version) +
                                  " (expected " + std::to_string(Checkpoint::kFormatVersion) + ")");

    const auto header_len = r.pod<std::uint64_t>();
    if (header_len > r.remaining()) corrupt("checkpoint is truncated");
    EncoderConfig arch;
    try {
        const auto header = nlohmann::json::parse(r.str(header_len));
        arch = header.at("architecture").get<EncoderConfig>();
        ckpt.config = header.at("training").get<TrainingConfig>();
        ckpt.step = header.at("step").get<int>();
        ckpt.selected_seed = header.at("selected_seed").get<std::uint64_t>();
        ckpt.restarts = header.at("restarts").get<std::vector<RestartRecord>>();
        ckpt.loss_history = header.at("loss_history").get<std::vector<LossBreakdown>>();
    } catch (const nlohmann::json::exception& e) {
        corrupt(std::string("bad checkpoint header: ") + e.what());
    }

    try {
        arch.validate();
    } catch (const std::exception& e) {
        corrupt(std::string("bad architecture in checkpoint: ") + e.what());
    }
    EncoderParams params(arch);
    const auto count = r.pod<std::uint32_t>();
    if (count != params.arrays().size())
        corrupt("checkpoint has " + std::to_string(count) + " arrays, architecture needs " +
                std::to_string(params.arrays().size()));
    for (auto& a : params.arrays()) {
        const auto name = r.str(r.pod<std::uint32_t>());
        if (name != a.name) corrupt("expected array '" + a.name + "', found '" + name + "'");
        const auto rank = r.pod<std::uint32_t>();
        if (rank != a.dims.size()) corrupt("array '" + name + "' has wrong rank");
        for (int d : a.dims)
            if (r.pod<std::uint32_t>() != static_cast<std::uint32_t>(d)) corrupt("array '" + name + "' has wrong shape");
        a.trainable = r.pod<std::uint8_t>() != 0;
        r.bytes(a.values.data(), a.values.size() * sizeof(float));
    }
    char trailer[8];
    r.bytes(trailer, sizeof(trailer));
    if (std::memcmp(trailer, kTrailer, sizeof(kTrailer)) != 0 || r.remaining() != 0)
        corrupt("checkpoint trailer missing or followed by extra bytes");

    try {
        params.validate();
    } catch (const std::exception& e) {
        corrupt(std::string("invalid parameters in checkpoint: ") + e.what());
    }
    ckpt.params = std::move(params);
    return ckpt;
}

}  // namespace motionloc
