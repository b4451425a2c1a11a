if __name__ == "__main__":
    from .cmd import run

    run()
