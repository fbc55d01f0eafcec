import os

BASE_DIR = os.path.abspath(os.path.dirname(__file__))

# Dossier "data" : runs, traces, exports. Surchargeable pour les postes partagés.
DEFAULT_DATA_DIR = os.path.join(BASE_DIR, "data")
DATA_DIR = os.environ.get("ARENA_DATA_DIR", DEFAULT_DATA_DIR)
os.makedirs(DATA_DIR, exist_ok=True)


def _env_bool(name: str, default: str) -> bool:
    return os.environ.get(name, default) in {"1", "true", "True", "yes", "YES"}


class Config:
    # --- LLM gateway ----------------------------------------------------------
    # OpenAI-compatible endpoint. Empty base URL => only the stub backend works.
    LLM_BASE_URL = os.environ.get("ARENA_LLM_BASE_URL", "")
    LLM_API_KEY = os.environ.get("ARENA_LLM_API_KEY", "")
    LLM_MODEL = os.environ.get("ARENA_LLM_MODEL", "gpt-4o")
    LLM_TIMEOUT = float(os.environ.get("ARENA_LLM_TIMEOUT", "120"))
    LLM_MAX_ATTEMPTS = int(os.environ.get("ARENA_LLM_MAX_ATTEMPTS", "3"))
    LLM_VISION = _env_bool("ARENA_LLM_VISION", "1")

    # --- Runs -----------------------------------------------------------------
    DATA_DIR = DATA_DIR
    RUNS_DIR = os.path.join(DATA_DIR, "runs")
    LOG_LEVEL = os.environ.get("ARENA_LOG_LEVEL", "INFO")

    # --- Export DB ------------------------------------------------------------
    # Priorité aux variables d'environnement, fallback SQLite local.
    DB_PATH = os.path.join(DATA_DIR, "arena.db")
    _default_sqlite_uri = "sqlite:///" + DB_PATH.replace("\\", "/")

    _db_url = (
        os.environ.get("ARENA_DATABASE_URL")
        or os.environ.get("DATABASE_URL")
        or _default_sqlite_uri
    )

    # Compat anciens formats (Heroku-like) + driver psycopg v3
    if _db_url.startswith("postgres://"):
        _db_url = _db_url.replace("postgres://", "postgresql://", 1)
    if _db_url.startswith("postgresql://"):
        _db_url = _db_url.replace("postgresql://", "postgresql+psycopg://", 1)

    DATABASE_URL = _db_url
