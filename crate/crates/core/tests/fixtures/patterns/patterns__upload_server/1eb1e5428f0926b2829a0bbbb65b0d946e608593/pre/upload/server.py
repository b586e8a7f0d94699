import os
from os import remove

from flask import Flask, request


def uploadimage():
    all_files = sorted_files()
    filename = all_files[0][1] + all_files[0][2]
    remove(filename)
    del all_files[0]
    length = len(all_files)
    return str(length)
