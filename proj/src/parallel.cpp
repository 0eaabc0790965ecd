// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/image.h>
#include <hdrsplat/parallel.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace hdrsplat {

namespace {
std::atomic<int> gThreads{0};
}

void setThreadCount(int n) { gThreads.store(std::max(0, n)); }

int threadCount() {
    const int n = gThreads.load();
    if (n > 0) {
        return n;
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallelForChunks(std::size_t chunks, const std::function<void(std::size_t)> &body) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threadCount()), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) {
            body(c);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failureMutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t c = next.fetch_add(1);
                if (c >= chunks) {
                    return;
                }
                try {
                    body(c);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failureMutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto &t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

Image sliceChannels(const Image &src, int first, int count) {
    if (first < 0 || count < 0 || first + count > src.channels) {
        throw InvalidArgument("sliceChannels: channel range out of bounds");
    }
    Image out(src.width, src.height, count);
    const std::size_t n = src.pixelCount();
    for (std::size_t p = 0; p < n; ++p) {
        for (int c = 0; c < count; ++c) {
            out.data[p * count + c] = src.data[p * src.channels + first + c];
        }
    }
    return out;
}

} // namespace hdrsplat
