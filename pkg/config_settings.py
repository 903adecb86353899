from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_prefix="SPREADLAB_")

    log_level: str = "INFO"
    log_dir: str = "logs"
    log_to_file: bool = True
    output_dir: str = "out"

    # default Orlicz parameters (rationals as "p/q")
    tau: str = "1/2"
    r: str = "2"
    p: str = "5/2"

    grid_points: int = 256
    luxemburg_tol: float = 1e-9
    domination_cap: float = 1e6
    sample_seed: int = 0
    random_samples: int = 64
    threads: int = 1
    param_margin: float = 1e-9
    exact_digits: int = 50
    # extensions refuse to grow a domain end past this many bits
    max_domain_bits: int = 1_000_000


settings = Settings()
