import os
from dataclasses import dataclass
from dotenv import load_dotenv

load_dotenv()

@dataclass
class Config:
    # Simulation
    default_shots: int = int(os.getenv("RESETLAB_SHOTS", "1000"))
    default_seed: int = int(os.getenv("RESETLAB_SEED", "7"))
    default_resets: int = int(os.getenv("RESETLAB_RESETS", "4"))
    chunk_size: int = int(os.getenv("RESETLAB_CHUNK_SIZE", "8192"))
    max_width: int = int(os.getenv("RESETLAB_MAX_WIDTH", "16"))
    workers: int = int(os.getenv("RESETLAB_WORKERS", "1"))

    # Noise (symmetric readout error, conditional-X failure)
    eps_read: float = float(os.getenv("RESETLAB_EPS_READ", "0.0326"))
    eps_condx: float = float(os.getenv("RESETLAB_EPS_CONDX", "0.0020"))

    # Billing
    catalog_path: str = os.getenv("RESETLAB_CATALOG", "data/pricing_catalog.txt")
    baseline_cost_per_shot: str = os.getenv("RESETLAB_BASELINE_PER_SHOT", "0.001500")
    audit_threshold: float = float(os.getenv("RESETLAB_AUDIT_THRESHOLD", "0.5"))

    # Paths
    fixtures_dir: str = os.getenv("RESETLAB_FIXTURES", "fixtures")
    out_dir: str = os.getenv("RESETLAB_OUT_DIR", "")

    # App
    debug: bool = os.getenv("DEBUG", "False").lower() == "true"
    log_level: str = os.getenv("LOG_LEVEL", "INFO")

config = Config()
