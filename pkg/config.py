import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Paths
PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))
DATA_DIR = os.getenv("VARC_DATA_DIR", os.path.join(PROJECT_ROOT, "data"))
OUTPUT_DIR = os.getenv("VARC_OUTPUT_DIR", os.path.join(PROJECT_ROOT, "runs"))

# Runtime
DEVICE = os.getenv("VARC_DEVICE", "auto")
NUM_WORKERS = int(os.getenv("VARC_NUM_WORKERS", 0))
SEED = int(os.getenv("VARC_SEED", 0))

# Logging
LOG_LEVEL = os.getenv("VARC_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
