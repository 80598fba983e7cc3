import os

# keep BLAS single-threaded so worker processes do not oversubscribe;
# must be set before numpy is imported by any test module
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")
