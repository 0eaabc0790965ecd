// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/checkpoint.h>
#include <hdrsplat/error.h>
#include <hdrsplat/image_io.h>

#include <bit>
#include <cstring>
#include <sstream>

namespace hdrsplat {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
public:
    template <typename T> void put(T v) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        mOut.append(buf, sizeof(T));
    }
    void reals(const std::vector<double> &v) {
        mOut.append(reinterpret_cast<const char *>(v.data()), v.size() * sizeof(double));
    }
    void bytes(const std::string &s) { mOut += s; }
    std::string &out() { return mOut; }

private:
    std::string mOut;
};

class Reader {
public:
    Reader(const std::string &bytes, std::size_t end) : mBytes(bytes), mEnd(end) {}

    template <typename T> T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, mBytes.data() + mPos, sizeof(T));
        mPos += sizeof(T);
        return v;
    }
    std::vector<double> reals(std::uint64_t n) {
        if (n > (mEnd - mPos) / sizeof(double)) {
            throw ParseError("checkpoint truncated", mPos);
        }
        std::vector<double> v(n);
        std::memcpy(v.data(), mBytes.data() + mPos, n * sizeof(double));
        mPos += n * sizeof(double);
        return v;
    }
    std::string bytes(std::uint64_t n) {
        need(n);
        std::string s = mBytes.substr(mPos, n);
        mPos += n;
        return s;
    }
    std::size_t pos() const { return mPos; }

private:
    void need(std::uint64_t n) const {
        if (n > mEnd - mPos) {
            throw ParseError("checkpoint truncated", mPos);
        }
    }
    const std::string &mBytes;
    std::size_t mEnd;
    std::size_t mPos = 0;
};

void putMlp(Writer &w, const Mlp &m) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.inputs()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.hidden()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.outputs()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(m.activation()));
    w.put<std::uint64_t>(m.params().size());
    w.reals(m.params());
}

void getMlp(Reader &r, Mlp &m, const char *name) {
    const auto pos = r.pos();
    const auto in = r.get<std::uint32_t>();
    const auto hidden = r.get<std::uint32_t>();
    const auto out = r.get<std::uint32_t>();
    const auto act = r.get<std::uint8_t>();
    const auto n = r.get<std::uint64_t>();
    if (static_cast<int>(in) != m.inputs() || static_cast<int>(hidden) != m.hidden() ||
        static_cast<int>(out) != m.outputs() || act != static_cast<std::uint8_t>(m.activation()) ||
        n != m.parameterCount()) {
        throw ParseError(std::string("checkpoint: tone mapper '") + name + "' has an unexpected shape", pos);
    }
    m.params() = r.reals(n);
}

} // namespace

std::uint64_t fnv1a64(const std::string &bytes, std::size_t length) {
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < length; ++i) {
        h ^= static_cast<unsigned char>(bytes[i]);
        h *= 1099511628211ULL;
    }
    return h;
}

std::string encodeCheckpoint(const Checkpoint &ckpt) {
    Writer w;
    w.bytes("GHDR");
    w.put<std::uint32_t>(kCheckpointVersion);

    const CloudParams &p = ckpt.cloud.params();
    w.put<std::uint64_t>(ckpt.cloud.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.cloud.featureDim()));
    for (const auto *v : {&p.position, &p.rotation, &p.logScale, &p.opacityLogit, &p.logIrradiance, &p.feature}) {
        w.reals(*v);
    }

    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.bank.featureDim));
    w.put<std::uint8_t>(ckpt.bank.residualEnabled ? 1 : 0);
    ckpt.bank.forEachMlp([&](const char *, const Mlp &m) { putMlp(w, m); });

    w.put<std::uint64_t>(ckpt.adam.size());
    for (const auto &[name, st] : ckpt.adam) {
        if (st.m.size() != st.v.size()) {
            throw InvalidArgument("checkpoint: Adam moments of group '" + name + "' differ in size");
        }
        w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
        w.put<std::uint64_t>(st.step);
        w.put<std::uint64_t>(st.m.size());
        w.reals(st.m);
        w.reals(st.v);
    }
    w.put<std::uint64_t>(ckpt.iteration);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.rngState.size()));
    w.bytes(ckpt.rngState);
    w.put<std::uint64_t>(ckpt.configEcho.size());
    w.bytes(ckpt.configEcho);
    const std::uint64_t sum = fnv1a64(w.out(), w.out().size());
    w.put<std::uint64_t>(sum);
    return std::move(w.out());
}

Checkpoint decodeCheckpoint(const std::string &bytes) {
    if (bytes.size() < 16 || bytes.compare(0, 4, "GHDR") != 0) {
        throw ParseError("not a checkpoint (bad magic)", 0);
    }
    const std::size_t body = bytes.size() - 8;
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body, 8);
    Reader r(bytes, body);
    r.bytes(4);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);
    }
    if (fnv1a64(bytes, body) != stored) {
        throw ParseError("checkpoint checksum mismatch", body);
    }

    Checkpoint ck;
    const auto n = r.get<std::uint64_t>();
    const auto d = r.get<std::uint32_t>();
    if (d < 1 || d > 60) {
        throw ParseError("checkpoint: feature width out of range", r.pos() - 4);
    }
    ck.cloud = GaussianCloud(n, static_cast<int>(d));
    CloudParams &p = ck.cloud.params();
    p.position = r.reals(n * 3);
    p.rotation = r.reals(n * 4);
    p.logScale = r.reals(n * 3);
    p.opacityLogit = r.reals(n);
    p.logIrradiance = r.reals(n * 3);
    p.feature = r.reals(n * d);

    const auto bd = r.get<std::uint32_t>();
    if (bd != d) {
        throw ParseError("checkpoint: tone mapper feature width differs from the cloud", r.pos() - 4);
    }
    ck.bank = ToneMapperBank(static_cast<int>(bd));
    ck.bank.residualEnabled = r.get<std::uint8_t>() != 0;
    ck.bank.forEachMlp([&](const char *name, Mlp &m) { getMlp(r, m, name); });

    const auto groups = r.get<std::uint64_t>();
    for (std::uint64_t g = 0; g < groups; ++g) {
        const auto len = r.get<std::uint32_t>();
        std::string name = r.bytes(len);
        AdamState st;
        st.step = r.get<std::uint64_t>();
        const auto count = r.get<std::uint64_t>();
        st.m = r.reals(count);
        st.v = r.reals(count);
        ck.adam.emplace(std::move(name), std::move(st));
    }
    ck.iteration = r.get<std::uint64_t>();
    ck.rngState = r.bytes(r.get<std::uint32_t>());
    ck.configEcho = r.bytes(r.get<std::uint64_t>());
    if (r.pos() != body) {
        throw ParseError("checkpoint has trailing bytes", r.pos());
    }
    return ck;
}

void saveCheckpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
    writeFileAtomic(path, encodeCheckpoint(ckpt));
}

Checkpoint loadCheckpoint(const std::filesystem::path &path) { return decodeCheckpoint(readFileBytes(path)); }

Checkpoint checkpointFromState(const TrainState &state, const std::string &configEcho) {
    Checkpoint ck;
    ck.cloud = state.cloud;
    ck.bank = state.bank;
    ck.adam = state.adam;
    ck.iteration = state.iteration;
    std::ostringstream rng;
    rng << state.rng;
    ck.rngState = rng.str();
    ck.configEcho = configEcho;
    return ck;
}

TrainState stateFromCheckpoint(const Checkpoint &ckpt) {
    TrainState st;
    st.cloud = ckpt.cloud;
    st.bank = ckpt.bank;
    st.adam = ckpt.adam;
    st.iteration = ckpt.iteration;
    if (!ckpt.rngState.empty()) {
        std::istringstream in(ckpt.rngState);
        in >> st.rng;
        if (!in) {
            throw ParseError("checkpoint: unreadable RNG state", 0);
        }
    }
    return st;
}

} // namespace hdrsplat
