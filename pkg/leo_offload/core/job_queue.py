"""
Evaluation queue for sweep cells.

Cells are isolated evaluations, so they run on a small pool of worker
threads; results are read back in submission order, which keeps merged output
independent of completion order.
"""

import threading
from datetime import datetime, timezone
from queue import Empty, Full, Queue
from typing import Any, Callable, Dict, List, Optional, Sequence

from loguru import logger

from ..models.jobs import JobStatus, QueuedJob
from .config import settings
from .errors import OffloadError


class EvaluationQueue:
    """Thread-safe job queue processing sweep cells"""

    def __init__(self, max_concurrent_workers: int = 2, max_queue_size: int = 256):
        self.queue: Queue = Queue(maxsize=max_queue_size)
        self.jobs: Dict[str, QueuedJob] = {}
        self.max_concurrent_workers = max_concurrent_workers
        self.current_workers = 0
        self.workers: List[threading.Thread] = []
        self.running = False
        self.lock = threading.Lock()
        self._next_index = 0

        self.processor: Optional[Callable[[Any], Any]] = None
        self.status_callback: Optional[Callable[[str, JobStatus, Any, Optional[str]], None]] = None

        logger.debug(f"EvaluationQueue initialized with {max_concurrent_workers} max workers")

    def set_processor(self, processor: Callable[[Any], Any]):
        """Set the function that evaluates one payload"""
        self.processor = processor

    def set_status_callback(self, callback: Callable[[str, JobStatus, Any, Optional[str]], None]):
        """Set callback for status updates"""
        self.status_callback = callback

    def start(self):
        """Start the worker threads"""
        if self.running:
            return
        self.running = True
        for i in range(self.max_concurrent_workers):
            worker = threading.Thread(target=self._worker, name=f"EvalWorker-{i}")
            worker.daemon = True
            worker.start()
            self.workers.append(worker)
        logger.debug(f"Started {len(self.workers)} evaluation workers")

    def stop(self):
        """Stop the worker threads"""
        if not self.running:
            return
        self.running = False

        # Sentinels wake every worker
        for _ in self.workers:
            self.queue.put(None)
        for worker in self.workers:
            worker.join(timeout=5.0)
        self.workers.clear()
        logger.debug("Stopped all evaluation workers")

    def submit(self, payload: Any, timeout: Optional[float] = 1.0) -> str:
        """Add a payload to the queue and return its job id"""
        with self.lock:
            index = self._next_index
            self._next_index += 1
            job_id = f"job-{index:05d}"
            self.jobs[job_id] = QueuedJob(
                id=job_id,
                index=index,
                payload=payload,
                timestamp=datetime.now(timezone.utc).isoformat(),
                status=JobStatus.QUEUED,
            )

        try:
            self.queue.put(job_id, timeout=timeout)
        except Full:
            with self.lock:
                self.jobs.pop(job_id, None)
            logger.error(f"Failed to queue job {job_id}: queue is full")
            raise OffloadError("Evaluation queue is full")

        self._notify(job_id, JobStatus.QUEUED, None, None)
        return job_id

    def get_job(self, job_id: str) -> Optional[QueuedJob]:
        with self.lock:
            return self.jobs.get(job_id)

    def cancel(self, job_id: str) -> bool:
        """Cancel a queued job (only works if not yet processing)"""
        with self.lock:
            job = self.jobs.get(job_id)
            if job is not None and job.status == JobStatus.QUEUED:
                job.status = JobStatus.CANCELLED
                logger.info(f"Cancelled job {job_id}")
                return True
        return False

    def wait(self):
        """Block until every submitted job has been processed"""
        self.queue.join()

    def results(self, job_ids: Sequence[str]) -> List[Any]:
        """
        Results in the order of ``job_ids``.

        Raises:
            OffloadError: if any of the jobs failed or was cancelled
        """
        with self.lock:
            jobs = [self.jobs[job_id] for job_id in job_ids]
        failed = [job for job in jobs if job.status != JobStatus.COMPLETED]
        if failed:
            first = failed[0]
            raise OffloadError(f"{len(failed)} job(s) did not complete; {first.id}: {first.error or first.status.value}")
        return [job.result for job in sorted(jobs, key=lambda j: j.index)]

    def get_queue_info(self) -> Dict[str, Any]:
        """Get information about the queue state"""
        with self.lock:
            status_counts: Dict[str, int] = {}
            for job in self.jobs.values():
                status_counts[job.status.value] = status_counts.get(job.status.value, 0) + 1
            return {
                'queue_size': self.queue.qsize(),
                'total_jobs': len(self.jobs),
                'current_workers': self.current_workers,
                'max_workers': self.max_concurrent_workers,
                'status_counts': status_counts,
                'running': self.running,
            }

    def _notify(self, job_id: str, status: JobStatus, result: Any, error: Optional[str]):
        if self.status_callback:
            try:
                self.status_callback(job_id, status, result, error)
            except Exception as e:
                logger.warning(f"Status callback failed: {e}")

    def _worker(self):
        """Worker thread function"""
        worker_name = threading.current_thread().name
        while self.running:
            try:
                job_id = self.queue.get(timeout=1.0)
            except Empty:
                continue

            if job_id is None:
                self.queue.task_done()
                break

            try:
                with self.lock:
                    job = self.jobs.get(job_id)
                    if job is None or job.status == JobStatus.CANCELLED:
                        continue
                    job.status = JobStatus.PROCESSING
                    job.processing_started_at = datetime.now(timezone.utc).isoformat()
                    self.current_workers += 1
                self._notify(job_id, JobStatus.PROCESSING, None, None)

                try:
                    if self.processor is None:
                        raise OffloadError("No processor configured")
                    result = self.processor(job.payload)
                    with self.lock:
                        job.status = JobStatus.COMPLETED
                        job.result = result
                        job.processing_completed_at = datetime.now(timezone.utc).isoformat()
                    logger.debug(f"Worker {worker_name} completed {job_id}")
                    self._notify(job_id, JobStatus.COMPLETED, result, None)
                except Exception as e:
                    error_msg = f"{type(e).__name__}: {e}"
                    with self.lock:
                        job.status = JobStatus.FAILED
                        job.error = error_msg
                        job.processing_completed_at = datetime.now(timezone.utc).isoformat()
                    logger.error(f"Worker {worker_name} failed on {job_id}: {error_msg}")
                    self._notify(job_id, JobStatus.FAILED, None, error_msg)
                finally:
                    with self.lock:
                        self.current_workers -= 1
            finally:
                self.queue.task_done()


def run_jobs(payloads: Sequence[Any], processor: Callable[[Any], Any],
             max_workers: Optional[int] = None) -> List[Any]:
    """Process payloads concurrently and return their results in submission order."""
    evaluation_queue = EvaluationQueue(
        max_concurrent_workers=max_workers or settings.max_workers,
        max_queue_size=settings.max_queue_size,
    )
    evaluation_queue.set_processor(processor)
    evaluation_queue.start()
    try:
        job_ids = [evaluation_queue.submit(payload, timeout=None) for payload in payloads]
        evaluation_queue.wait()
    finally:
        evaluation_queue.stop()
    return evaluation_queue.results(job_ids)
