from .cli import app


def main() -> None:
    app(prog_name="udog")


if __name__ == "__main__":
    main()
