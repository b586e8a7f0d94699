import os
import logging


def actualsys():
    attemps = 0
    while True:
        attemps += 1
        if attemps == 6:
            ## Brute force protection
            raise Exception("Too many password attempts.")
        if os.environ.get('GITHUB_ACTIONS') != "":
            logging.warning("Running on Github Actions")
            actualsys()
        elif uname == cred.name and pwdhash == cred.pwd:
            break
