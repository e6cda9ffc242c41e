#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace storyline {

/// Fixed pool of worker threads executing batches of closures. run_batch
/// blocks until its own batch finished; multiple callers may run batches
/// concurrently. A pool of size <= 1 runs batches inline on the caller.
class WorkerPool {
 public:
  explicit WorkerPool(int size) {
    for (int i = 1; i < size; ++i) {
      threads_.emplace_back([this] { work(); });
    }
  }

  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stop_ = true;
    }
    ready_.notify_all();
    for (auto& t : threads_) t.join();
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  // Runs all tasks and waits for them. The caller participates, so a batch
  // makes progress even when every pool thread is busy elsewhere.
  void run_batch(std::vector<std::function<void()>> tasks) {
    if (tasks.empty()) return;
    if (threads_.empty() || tasks.size() == 1) {
      for (auto& task : tasks) task();
      return;
    }
    Batch batch;
    batch.pending = tasks.size();
    {
      std::lock_guard<std::mutex> lock(mutex_);
      for (auto& task : tasks) {
        queue_.push_back({std::move(task), &batch});
      }
    }
    ready_.notify_all();
    std::unique_lock<std::mutex> lock(mutex_);
    while (batch.pending > 0) {
      if (queue_.empty()) {
        batch.done.wait(lock, [&batch, this] {
          return batch.pending == 0 || !queue_.empty();
        });
        continue;
      }
      Item item = std::move(queue_.front());
      queue_.pop_front();
      lock.unlock();
      item.task();
      lock.lock();
      if (--item.batch->pending == 0) item.batch->done.notify_all();
    }
  }

 private:
  struct Batch {
    size_t pending = 0;
    std::condition_variable done;
  };
  struct Item {
    std::function<void()> task;
    Batch* batch;
  };

  void work() {
    std::unique_lock<std::mutex> lock(mutex_);
    for (;;) {
      ready_.wait(lock, [this] { return stop_ || !queue_.empty(); });
      if (stop_) return;
      Item item = std::move(queue_.front());
      queue_.pop_front();
      lock.unlock();
      item.task();
      lock.lock();
      if (--item.batch->pending == 0) item.batch->done.notify_all();
    }
  }

  std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<Item> queue_;
  std::vector<std::thread> threads_;
  bool stop_ = false;
};

}  // namespace storyline
